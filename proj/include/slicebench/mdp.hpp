#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace slicebench {

inline constexpr int kTotalRbs = 17;   // resource bits shared by the three slices
inline constexpr int kTotalPrbs = 50;  // 16*3 + 2: the last eMBB Rb holds two PRBs
inline constexpr int kNumActions = 7;
inline constexpr int kMaxUsers = 10;  // per gNB, across all slices

enum class Slice : int { mmtc = 0, urllc = 1, embb = 2 };

inline constexpr std::array<Slice, 3> kSlices = {Slice::mmtc, Slice::urllc, Slice::embb};

inline const char* slice_name(Slice s) {
  switch (s) {
    case Slice::mmtc: return "mmtc";
    case Slice::urllc: return "urllc";
    case Slice::embb: return "embb";
  }
  return "?";
}

inline Slice slice_from_name(const std::string& name) {
  if (name == "mmtc" || name == "mMTC") return Slice::mmtc;
  if (name == "urllc" || name == "URLLC") return Slice::urllc;
  if (name == "embb" || name == "eMBB") return Slice::embb;
  throw std::invalid_argument("unknown slice name: " + name);
}

/// (#mMTC, #URLLC, #eMBB) users attached for one trial.
struct UserTuple {
  int n_mmtc = 0;
  int n_urllc = 0;
  int n_embb = 0;

  int total() const { return n_mmtc + n_urllc + n_embb; }
  int count(Slice s) const {
    switch (s) {
      case Slice::mmtc: return n_mmtc;
      case Slice::urllc: return n_urllc;
      case Slice::embb: return n_embb;
    }
    return 0;
  }
  bool valid() const {
    return n_mmtc >= 0 && n_urllc >= 0 && n_embb >= 0 && total() >= 1 && total() <= kMaxUsers;
  }
  friend bool operator==(const UserTuple&, const UserTuple&) = default;
  friend auto operator<=>(const UserTuple&, const UserTuple&) = default;
};

/// Coarse allocation unit: rb_embb is implied by the fixed total of 17.
struct RbAllocation {
  int rb_mmtc = 0;
  int rb_urllc = 0;

  int rb_embb() const { return kTotalRbs - rb_mmtc - rb_urllc; }
  int rb(Slice s) const {
    switch (s) {
      case Slice::mmtc: return rb_mmtc;
      case Slice::urllc: return rb_urllc;
      case Slice::embb: return rb_embb();
    }
    return 0;
  }
  bool valid() const { return rb_mmtc >= 1 && rb_urllc >= 1 && rb_embb() >= 1; }
  friend bool operator==(const RbAllocation&, const RbAllocation&) = default;
  friend auto operator<=>(const RbAllocation&, const RbAllocation&) = default;
};

// Rb -> PRB map: three PRBs per Rb except the last eMBB Rb, which holds two.
// Sums to kTotalPrbs for every valid allocation.
inline std::array<int, 3> prbs_of(const RbAllocation& rbs) {
  if (!rbs.valid()) throw std::invalid_argument("prbs_of: allocation must keep >= 1 Rb per slice");
  return {3 * rbs.rb_mmtc, 3 * rbs.rb_urllc, 3 * rbs.rb_embb() - 1};
}

struct State {
  UserTuple users;
  RbAllocation rbs;
  friend bool operator==(const State&, const State&) = default;
  friend auto operator<=>(const State&, const State&) = default;
};

// Action codes 0..6: 0 keeps the allocation, 1..6 move one Rb between slices.
// donor/receiver per code: 1 m->u, 2 m->e, 3 u->m, 4 u->e, 5 e->m, 6 e->u.
inline constexpr std::array<std::array<Slice, 2>, 6> kTransferTable = {{
    {Slice::mmtc, Slice::urllc},
    {Slice::mmtc, Slice::embb},
    {Slice::urllc, Slice::mmtc},
    {Slice::urllc, Slice::embb},
    {Slice::embb, Slice::mmtc},
    {Slice::embb, Slice::urllc},
}};

// A transfer that would drop any slice below 1 Rb is masked to a no-op.
inline RbAllocation apply_action(const RbAllocation& rbs, int action) {
  if (action < 0 || action >= kNumActions) throw std::invalid_argument("apply_action: action code out of range");
  if (action == 0) return rbs;
  const auto [from, to] = kTransferTable[static_cast<std::size_t>(action - 1)];
  if (rbs.rb(from) <= 1) return rbs;
  std::array<int, 3> r = {rbs.rb_mmtc, rbs.rb_urllc, rbs.rb_embb()};
  r[static_cast<int>(from)] -= 1;
  r[static_cast<int>(to)] += 1;
  return RbAllocation{r[0], r[1]};
}

// Always contains 0; contains a in 1..6 iff the transfer actually changes the allocation.
inline std::vector<int> valid_actions(const State& s) {
  std::vector<int> out;
  out.reserve(kNumActions);
  out.push_back(0);
  for (int a = 1; a < kNumActions; ++a) {
    if (apply_action(s.rbs, a) != s.rbs) out.push_back(a);
  }
  return out;
}

// Network input: users scaled by the 10-user cap, Rbs by the 17-Rb total.
inline std::array<double, 5> encode_state(const State& s) {
  return {
      s.users.n_mmtc / static_cast<double>(kMaxUsers),
      s.users.n_urllc / static_cast<double>(kMaxUsers),
      s.users.n_embb / static_cast<double>(kMaxUsers),
      s.rbs.rb_mmtc / static_cast<double>(kTotalRbs),
      s.rbs.rb_urllc / static_cast<double>(kTotalRbs),
  };
}

// Packs the five state components into one key for table lookups.
inline std::uint64_t state_key(const State& s) {
  auto u = [](int v) { return static_cast<std::uint64_t>(v) & 0x3f; };
  return u(s.users.n_mmtc) | (u(s.users.n_urllc) << 6) | (u(s.users.n_embb) << 12) |
         (u(s.rbs.rb_mmtc) << 18) | (u(s.rbs.rb_urllc) << 24);
}

/// One logged MDP sample; the user tuple is fixed within a trial.
struct Transition {
  State s;
  int a = 0;
  State s_next;
  double r = 0.0;
  int epoch = 0;
  int trial = 0;
  int period = 0;
};

// All user tuples with 1 <= total <= 10; exactly 285 of them.
inline std::vector<UserTuple> enumerate_user_tuples() {
  std::vector<UserTuple> out;
  for (int m = 0; m <= kMaxUsers; ++m)
    for (int u = 0; u + m <= kMaxUsers; ++u)
      for (int e = 0; e + u + m <= kMaxUsers; ++e)
        if (m + u + e >= 1) out.push_back(UserTuple{m, u, e});
  return out;
}

// All allocations with >= 1 Rb per slice; exactly 120 of them.
inline std::vector<RbAllocation> enumerate_allocations() {
  std::vector<RbAllocation> out;
  for (int m = 1; m <= kTotalRbs - 2; ++m)
    for (int u = 1; m + u <= kTotalRbs - 1; ++u) out.push_back(RbAllocation{m, u});
  return out;
}

}  // namespace slicebench
