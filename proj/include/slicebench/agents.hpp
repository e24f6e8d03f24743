#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "slicebench/mdp.hpp"
#include "slicebench/nn.hpp"
#include "slicebench/rng.hpp"
#include "slicebench/serialize.hpp"

namespace slicebench {

// Action-validity hook. The default is the real Rb lattice; tests can inject
// restricted toy MDPs without touching the trainers.
using ValidActionsFn = std::function<std::vector<int>(const State&)>;

inline ValidActionsFn default_valid_actions() {
  return [](const State& s) { return valid_actions(s); };
}

struct Hyperparams {
  double tabular_lr = 0.1;
  double tabular_tol = 1e-4;
  int max_passes = 200;
  double dqn_lr = 0.01;
  int minibatch = 64;
  int target_sync_interval = 500;
  int dqn_steps = 20000;
  double discount = 0.99;
  double epsilon = 0.05;
  uint64_t seed = 1;

  void validate() const {
    if (!(tabular_lr > 0.0 && tabular_lr <= 1.0)) throw std::invalid_argument("tabular_lr must be in (0,1]");
    if (!(tabular_tol > 0.0)) throw std::invalid_argument("tabular_tol must be > 0");
    if (max_passes < 1) throw std::invalid_argument("max_passes must be >= 1");
    if (!(dqn_lr > 0.0)) throw std::invalid_argument("dqn_lr must be > 0");
    if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
    if (target_sync_interval < 1) throw std::invalid_argument("target_sync_interval must be >= 1");
    if (dqn_steps < 1) throw std::invalid_argument("dqn_steps must be >= 1");
    if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("discount must be in [0,1)");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in [0,1]");
  }
};

// Sparse action-value table. Only (state, action) pairs touched by training
// exist; everything else reads as 0.
class QTable {
 public:
  explicit QTable(ValidActionsFn valid = default_valid_actions()) : valid_(std::move(valid)) {}

  double value(const State& s, int a) const {
    auto it = cells_.find(state_key(s));
    if (it == cells_.end()) return 0.0;
    return it->second.q[static_cast<size_t>(a)];
  }

  double& cell(const State& s, int a) {
    if (a < 0 || a >= kNumActions) throw std::out_of_range("action out of range");
    auto [it, inserted] = cells_.try_emplace(state_key(s));
    if (inserted) it->second.s = s;
    return it->second.q[static_cast<size_t>(a)];
  }

  double max_valid(const State& s) const {
    double best = std::numeric_limits<double>::lowest();
    for (int a : valid_(s)) best = std::max(best, value(s, a));
    return best;
  }

  int greedy_action(const State& s) const {
    double best = std::numeric_limits<double>::lowest();
    int arg = 0;
    for (int a : valid_(s)) {
      double q = value(s, a);
      if (q > best) {
        best = q;
        arg = a;
      }
    }
    return arg;
  }

  size_t n_states() const { return cells_.size(); }
  const ValidActionsFn& valid_fn() const { return valid_; }
  void set_valid_fn(ValidActionsFn f) { valid_ = std::move(f); }

  struct Entry {
    State s{};
    std::array<double, kNumActions> q{};
  };
  // Ordered map keyed on the packed state so iteration (and serialization) is
  // deterministic.
  const std::map<uint64_t, Entry>& entries() const { return cells_; }
  std::map<uint64_t, Entry>& entries() { return cells_; }

 private:
  std::map<uint64_t, Entry> cells_;
  ValidActionsFn valid_;
};

// Fully connected 5 -> 256 -> 7 network over the normalized state encoding.
class QNetwork {
 public:
  static constexpr int kIn = 5;
  static constexpr int kHidden = 256;
  static constexpr int kOut = kNumActions;

  explicit QNetwork(ValidActionsFn valid = default_valid_actions())
      : params_(Eigen::VectorXd::Zero(n_params())), valid_(std::move(valid)) {}

  static Eigen::Index n_params() {
    return static_cast<Eigen::Index>(kIn) * kHidden + kHidden + static_cast<Eigen::Index>(kHidden) * kOut + kOut;
  }

  void init_weights(uint64_t seed) {
    auto rng = make_rng(seed, {0x51u});
    init_weights_normal(params_.segment(0, kIn * kHidden), std::sqrt(2.0 / kIn), rng);
    params_.segment(kIn * kHidden, kHidden).setZero();
    init_weights_normal(params_.segment(off_w2(), kHidden * kOut), std::sqrt(2.0 / kHidden), rng);
    params_.segment(off_b2(), kOut).setZero();
  }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // Weight views into the flat parameter vector.
  Eigen::Map<const Eigen::MatrixXd> w1() const { return {params_.data(), kHidden, kIn}; }
  Eigen::Map<const Eigen::VectorXd> b1() const { return {params_.data() + kIn * kHidden, kHidden}; }
  Eigen::Map<const Eigen::MatrixXd> w2() const { return {params_.data() + off_w2(), kOut, kHidden}; }
  Eigen::Map<const Eigen::VectorXd> b2() const { return {params_.data() + off_b2(), kOut}; }

  // rows of x are state encodings; returns one row of action values per row.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd h = (x * w1().transpose()).rowwise() + b1().transpose();
    h = h.cwiseMax(0.0);
    return (h * w2().transpose()).rowwise() + b2().transpose();
  }

  Eigen::VectorXd forward(const State& s) const {
    Eigen::MatrixXd x(1, kIn);
    auto e = encode_state(s);
    for (int i = 0; i < kIn; ++i) x(0, i) = e[static_cast<size_t>(i)];
    return forward_batch(x).row(0).transpose();
  }

  double value(const State& s, int a) const {
    if (a < 0 || a >= kNumActions) throw std::out_of_range("action out of range");
    return forward(s)[a];
  }

  double max_valid(const State& s) const {
    Eigen::VectorXd q = forward(s);
    double best = std::numeric_limits<double>::lowest();
    for (int a : valid_(s)) best = std::max(best, q[a]);
    return best;
  }

  int greedy_action(const State& s) const {
    Eigen::VectorXd q = forward(s);
    double best = std::numeric_limits<double>::lowest();
    int arg = 0;
    for (int a : valid_(s)) {
      if (q[a] > best) {
        best = q[a];
        arg = a;
      }
    }
    return arg;
  }

  const ValidActionsFn& valid_fn() const { return valid_; }
  void set_valid_fn(ValidActionsFn f) { valid_ = std::move(f); }

  static Eigen::Index off_w2() { return static_cast<Eigen::Index>(kIn) * kHidden + kHidden; }
  static Eigen::Index off_b2() { return off_w2() + static_cast<Eigen::Index>(kHidden) * kOut; }

 private:
  Eigen::VectorXd params_;
  ValidActionsFn valid_;
};

// Pre-encoded minibatch for the TD loss. Exposed so gradient tests can drive
// the exact training-time loss through finite differences.
struct TdBatch {
  Eigen::MatrixXd x;         // B x 5 encoded states
  std::vector<int> actions;  // B
  Eigen::VectorXd targets;   // B fixed regression targets
};

inline double td_loss(const QNetwork& net, const TdBatch& batch) {
  const Eigen::Index n = batch.x.rows();
  if (n == 0) throw std::invalid_argument("empty batch");
  Eigen::MatrixXd q = net.forward_batch(batch.x);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double diff = q(i, batch.actions[static_cast<size_t>(i)]) - batch.targets[i];
    acc += diff * diff;
  }
  return acc / static_cast<double>(n);
}

inline Eigen::VectorXd td_loss_grad(const QNetwork& net, const TdBatch& batch) {
  const Eigen::Index n = batch.x.rows();
  if (n == 0) throw std::invalid_argument("empty batch");
  Eigen::MatrixXd h_pre = (batch.x * net.w1().transpose()).rowwise() + net.b1().transpose();
  Eigen::MatrixXd h = h_pre.cwiseMax(0.0);
  Eigen::MatrixXd q = (h * net.w2().transpose()).rowwise() + net.b2().transpose();

  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(n, QNetwork::kOut);
  for (Eigen::Index i = 0; i < n; ++i) {
    int a = batch.actions[static_cast<size_t>(i)];
    dq(i, a) = 2.0 * (q(i, a) - batch.targets[i]) / static_cast<double>(n);
  }

  Eigen::MatrixXd dh = dq * net.w2();
  dh = (h_pre.array() > 0.0).select(dh, 0.0);

  Eigen::VectorXd grad(QNetwork::n_params());
  Eigen::Map<Eigen::MatrixXd>(grad.data(), QNetwork::kHidden, QNetwork::kIn) = dh.transpose() * batch.x;
  Eigen::Map<Eigen::VectorXd>(grad.data() + QNetwork::kIn * QNetwork::kHidden, QNetwork::kHidden) =
      dh.colwise().sum().transpose();
  Eigen::Map<Eigen::MatrixXd>(grad.data() + QNetwork::off_w2(), QNetwork::kOut, QNetwork::kHidden) =
      dq.transpose() * h;
  Eigen::Map<Eigen::VectorXd>(grad.data() + QNetwork::off_b2(), QNetwork::kOut) = dq.colwise().sum().transpose();
  return grad;
}

// One sweep-based offline Q-learning pass over a fixed transition set.
inline QTable tabular_train(const std::vector<Transition>& data, const Hyperparams& hp,
                            ValidActionsFn valid = default_valid_actions()) {
  hp.validate();
  if (data.empty()) throw std::invalid_argument("tabular_train: empty dataset");
  QTable q(valid);
  auto rng = make_rng(hp.seed, {0x7Au});
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (int pass = 0; pass < hp.max_passes; ++pass) {
    std::shuffle(order.begin(), order.end(), rng);
    double max_delta = 0.0;
    for (size_t i : order) {
      const Transition& t = data[i];
      double target = t.r + hp.discount * q.max_valid(t.s_next);
      double& cell = q.cell(t.s, t.a);
      double delta = hp.tabular_lr * (target - cell);
      cell += delta;
      max_delta = std::max(max_delta, std::abs(delta));
    }
    if (max_delta < hp.tabular_tol) break;
  }
  return q;
}

// Offline DQN: uniform minibatches from the fixed dataset, periodic target
// sync, bootstrap maxes restricted to valid actions of the next state.
inline QNetwork dqn_train(const std::vector<Transition>& data, const Hyperparams& hp,
                          ValidActionsFn valid = default_valid_actions()) {
  hp.validate();
  if (data.empty()) throw std::invalid_argument("dqn_train: empty dataset");
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());

  Eigen::MatrixXd xs(n, QNetwork::kIn), xsp(n, QNetwork::kIn);
  Eigen::VectorXd rs(n);
  std::vector<int> as(data.size());
  std::vector<std::vector<int>> next_valid(data.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = data[static_cast<size_t>(i)];
    auto es = encode_state(t.s);
    auto ep = encode_state(t.s_next);
    for (int j = 0; j < QNetwork::kIn; ++j) {
      xs(i, j) = es[static_cast<size_t>(j)];
      xsp(i, j) = ep[static_cast<size_t>(j)];
    }
    rs[i] = t.r;
    as[static_cast<size_t>(i)] = t.a;
    next_valid[static_cast<size_t>(i)] = valid(t.s_next);
    if (next_valid[static_cast<size_t>(i)].empty()) throw std::invalid_argument("state with no valid actions");
  }

  QNetwork net(valid);
  net.init_weights(hp.seed);
  Eigen::VectorXd target_params = net.params();

  Adam opt;
  opt.lr = hp.dqn_lr;
  opt.init(net.params().size());
  auto rng = make_rng(hp.seed, {0xD9u});
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);

  QNetwork target(valid);
  TdBatch batch;
  const Eigen::Index b = std::min<Eigen::Index>(hp.minibatch, n);
  batch.x.resize(b, QNetwork::kIn);
  batch.actions.resize(static_cast<size_t>(b));
  batch.targets.resize(b);
  Eigen::MatrixXd xp(b, QNetwork::kIn);
  std::vector<Eigen::Index> idx(static_cast<size_t>(b));

  for (int step = 1; step <= hp.dqn_steps; ++step) {
    for (Eigen::Index i = 0; i < b; ++i) idx[static_cast<size_t>(i)] = pick(rng);
    for (Eigen::Index i = 0; i < b; ++i) {
      batch.x.row(i) = xs.row(idx[static_cast<size_t>(i)]);
      xp.row(i) = xsp.row(idx[static_cast<size_t>(i)]);
      batch.actions[static_cast<size_t>(i)] = as[static_cast<size_t>(idx[static_cast<size_t>(i)])];
    }
    target.params() = target_params;
    Eigen::MatrixXd qp = target.forward_batch(xp);
    for (Eigen::Index i = 0; i < b; ++i) {
      double best = std::numeric_limits<double>::lowest();
      for (int a : next_valid[static_cast<size_t>(idx[static_cast<size_t>(i)])]) best = std::max(best, qp(i, a));
      batch.targets[i] = rs[idx[static_cast<size_t>(i)]] + hp.discount * best;
    }
    Eigen::VectorXd grad = td_loss_grad(net, batch);
    if (!all_finite(grad) || !all_finite(net.params()))
      throw std::runtime_error("dqn_train: non-finite values at step " + std::to_string(step));
    opt.update(net.params(), grad);
    if (step % hp.target_sync_interval == 0) target_params = net.params();
  }
  return net;
}

enum class PolicyKind : int { tabular = 0, deepq = 1, random = 2, expert_static = 3 };

inline std::string policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::tabular: return "tabular";
    case PolicyKind::deepq: return "deepq";
    case PolicyKind::random: return "random";
    case PolicyKind::expert_static: return "expert";
  }
  throw std::invalid_argument("unknown policy kind");
}

struct ExpertRule {
  // Per-user Rb demand weights by slice (mmtc, urllc, embb).
  std::array<double, 3> weights{1.0, 2.0, 3.0};
};

// Static proportional target: share Rbs by weighted user count, keep every
// slice at >= 1 Rb, settle remainders by largest fractional part.
inline RbAllocation expert_target(const UserTuple& users, const ExpertRule& rule = {}) {
  if (!users.valid()) throw std::invalid_argument("invalid user tuple");
  std::array<double, 3> load{rule.weights[0] * users.n_mmtc, rule.weights[1] * users.n_urllc,
                             rule.weights[2] * users.n_embb};
  double total = load[0] + load[1] + load[2];
  std::array<double, 3> raw{};
  if (total > 0.0)
    for (int i = 0; i < 3; ++i) raw[static_cast<size_t>(i)] = kTotalRbs * load[static_cast<size_t>(i)] / total;
  std::array<int, 3> rb{};
  for (int i = 0; i < 3; ++i)
    rb[static_cast<size_t>(i)] = std::max(1, static_cast<int>(std::floor(raw[static_cast<size_t>(i)])));
  int sum = rb[0] + rb[1] + rb[2];
  while (sum > kTotalRbs) {
    int pick = -1;
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
      if (rb[static_cast<size_t>(i)] <= 1) continue;
      double over = rb[static_cast<size_t>(i)] - raw[static_cast<size_t>(i)];
      if (over > worst) {
        worst = over;
        pick = i;
      }
    }
    --rb[static_cast<size_t>(pick)];
    --sum;
  }
  while (sum < kTotalRbs) {
    int pick = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
      double deficit = raw[static_cast<size_t>(i)] - rb[static_cast<size_t>(i)];
      if (deficit > best) {
        best = deficit;
        pick = i;
      }
    }
    ++rb[static_cast<size_t>(pick)];
    ++sum;
  }
  return RbAllocation{rb[0], rb[1]};
}

// Single dispatch point for acting policies of every kind.
class Policy {
 public:
  PolicyKind kind = PolicyKind::random;
  std::shared_ptr<const QTable> table;
  std::shared_ptr<const QNetwork> net;
  ExpertRule expert;
  Hyperparams hp;  // carried for provenance in saved files

  void reseed(uint64_t seed) { rng_ = make_rng(seed, {0xACu}); }

  int act(const State& s) const {
    switch (kind) {
      case PolicyKind::tabular:
        return table->greedy_action(s);
      case PolicyKind::deepq:
        return net->greedy_action(s);
      case PolicyKind::random: {
        auto va = valid_actions(s);
        std::uniform_int_distribution<size_t> d(0, va.size() - 1);
        return va[d(rng_)];
      }
      case PolicyKind::expert_static: {
        RbAllocation target = expert_target(s.users, expert);
        std::array<int, 3> diff{s.rbs.rb_mmtc - target.rb_mmtc, s.rbs.rb_urllc - target.rb_urllc,
                                s.rbs.rb_embb() - target.rb_embb()};
        int donor = -1, receiver = -1;
        int hi = 0, lo = 0;
        for (int i = 0; i < 3; ++i) {
          if (diff[static_cast<size_t>(i)] > hi) {
            hi = diff[static_cast<size_t>(i)];
            donor = i;
          }
          if (diff[static_cast<size_t>(i)] < lo) {
            lo = diff[static_cast<size_t>(i)];
            receiver = i;
          }
        }
        if (donor < 0 || receiver < 0) return 0;
        for (int a = 1; a < kNumActions; ++a) {
          auto [from, to] = kTransferTable[static_cast<size_t>(a - 1)];
          if (static_cast<int>(from) == donor && static_cast<int>(to) == receiver) return a;
        }
        return 0;
      }
    }
    throw std::logic_error("unreachable");
  }

 private:
  mutable std::mt19937_64 rng_{make_rng(1, {0xACu})};
};

inline int act_greedy(const Policy& p, const State& s) { return p.act(s); }

// Epsilon exploration wrapper; the coin and the uniform draw share `rng` so a
// collection episode is reproducible from one seed.
inline int act_epsilon(const Policy& p, const State& s, double epsilon, std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in [0,1]");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    auto va = valid_actions(s);
    std::uniform_int_distribution<size_t> d(0, va.size() - 1);
    return va[d(rng)];
  }
  return p.act(s);
}

inline Policy make_random_policy(uint64_t seed = 1) {
  Policy p;
  p.kind = PolicyKind::random;
  p.reseed(seed);
  return p;
}

inline Policy make_expert_policy(ExpertRule rule = {}) {
  Policy p;
  p.kind = PolicyKind::expert_static;
  p.expert = rule;
  return p;
}

inline Policy make_tabular_policy(QTable q, Hyperparams hp = {}) {
  Policy p;
  p.kind = PolicyKind::tabular;
  p.table = std::make_shared<QTable>(std::move(q));
  p.hp = hp;
  return p;
}

inline Policy make_deepq_policy(QNetwork n, Hyperparams hp = {}) {
  Policy p;
  p.kind = PolicyKind::deepq;
  p.net = std::make_shared<QNetwork>(std::move(n));
  p.hp = hp;
  return p;
}

namespace detail {

constexpr uint32_t kPolicyMagic = 0x5342504Cu;  // "SBPL"
constexpr uint32_t kPolicyVersion = 1;

inline void write_hyperparams(BinaryWriter& w, const Hyperparams& hp) {
  w.f64(hp.tabular_lr);
  w.f64(hp.tabular_tol);
  w.i32(hp.max_passes);
  w.f64(hp.dqn_lr);
  w.i32(hp.minibatch);
  w.i32(hp.target_sync_interval);
  w.i32(hp.dqn_steps);
  w.f64(hp.discount);
  w.f64(hp.epsilon);
  w.u64(hp.seed);
}

inline Hyperparams read_hyperparams(BinaryReader& r) {
  Hyperparams hp;
  hp.tabular_lr = r.f64();
  hp.tabular_tol = r.f64();
  hp.max_passes = r.i32();
  hp.dqn_lr = r.f64();
  hp.minibatch = r.i32();
  hp.target_sync_interval = r.i32();
  hp.dqn_steps = r.i32();
  hp.discount = r.f64();
  hp.epsilon = r.f64();
  hp.seed = r.u64();
  return hp;
}

}  // namespace detail

inline void save_policy(const Policy& p, const std::string& path) {
  BinaryWriter w(path);
  w.u32(detail::kPolicyMagic);
  w.u32(detail::kPolicyVersion);
  w.u8(static_cast<uint8_t>(p.kind));
  detail::write_hyperparams(w, p.hp);
  switch (p.kind) {
    case PolicyKind::tabular: {
      if (!p.table) throw std::invalid_argument("tabular policy without table");
      w.u64(p.table->entries().size());
      for (const auto& [key, e] : p.table->entries()) {
        w.i32(e.s.users.n_mmtc);
        w.i32(e.s.users.n_urllc);
        w.i32(e.s.users.n_embb);
        w.i32(e.s.rbs.rb_mmtc);
        w.i32(e.s.rbs.rb_urllc);
        w.f64_array(e.q.data(), e.q.size());
      }
      break;
    }
    case PolicyKind::deepq: {
      if (!p.net) throw std::invalid_argument("deepq policy without network");
      w.i32(QNetwork::kIn);
      w.i32(QNetwork::kHidden);
      w.i32(QNetwork::kOut);
      w.u64(static_cast<uint64_t>(p.net->params().size()));
      w.f64_array(p.net->params().data(), static_cast<size_t>(p.net->params().size()));
      break;
    }
    case PolicyKind::random:
      break;
    case PolicyKind::expert_static:
      w.f64_array(p.expert.weights.data(), 3);
      break;
  }
  w.finish();
}

inline Policy load_policy(const std::string& path, ValidActionsFn valid = default_valid_actions()) {
  BinaryReader r(path);
  if (r.u32() != detail::kPolicyMagic) throw std::runtime_error("not a policy file: " + path);
  if (r.u32() != detail::kPolicyVersion) throw std::runtime_error("unsupported policy version: " + path);
  int kind_raw = r.u8();
  if (kind_raw < 0 || kind_raw > 3) throw std::runtime_error("corrupt policy kind");
  Policy p;
  p.kind = static_cast<PolicyKind>(kind_raw);
  p.hp = detail::read_hyperparams(r);
  switch (p.kind) {
    case PolicyKind::tabular: {
      QTable q(valid);
      uint64_t n = r.u64();
      for (uint64_t i = 0; i < n; ++i) {
        QTable::Entry e;
        e.s.users.n_mmtc = r.i32();
        e.s.users.n_urllc = r.i32();
        e.s.users.n_embb = r.i32();
        e.s.rbs.rb_mmtc = r.i32();
        e.s.rbs.rb_urllc = r.i32();
        r.f64_array(e.q.data(), e.q.size());
        q.entries().emplace(state_key(e.s), e);
      }
      p.table = std::make_shared<QTable>(std::move(q));
      break;
    }
    case PolicyKind::deepq: {
      if (r.i32() != QNetwork::kIn || r.i32() != QNetwork::kHidden || r.i32() != QNetwork::kOut)
        throw std::runtime_error("policy network shape mismatch");
      QNetwork net(valid);
      uint64_t n = r.u64();
      if (n != static_cast<uint64_t>(QNetwork::n_params())) throw std::runtime_error("policy parameter count mismatch");
      r.f64_array(net.params().data(), static_cast<size_t>(n));
      p.net = std::make_shared<QNetwork>(std::move(net));
      break;
    }
    case PolicyKind::random:
      p.reseed(p.hp.seed);
      break;
    case PolicyKind::expert_static:
      r.f64_array(p.expert.weights.data(), 3);
      break;
  }
  return p;
}

}  // namespace slicebench
