#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "slicebench/mdp.hpp"
#include "slicebench/rng.hpp"

namespace slicebench {

enum class Direction : int { downlink = 0, uplink = 1 };

struct TraceEvent {
  std::int64_t t_ms = 0;
  std::int64_t bytes = 0;
  Direction direction = Direction::downlink;
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

using Trace = std::vector<TraceEvent>;

/// Named generator parameters for one slice's synthetic traffic.
/// Stands in for replayed captures; every knob is config-overridable.
struct SliceProfile {
  Slice slice = Slice::embb;
  std::map<std::string, double> params;

  double get(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) throw std::invalid_argument("SliceProfile: missing parameter " + key);
    return it->second;
  }

  // eMBB: on/off downlink streaming. URLLC: periodic bidirectional with jitter.
  // mMTC: Poisson bursts of a few small packets, mixed direction.
  static SliceProfile defaults(Slice s) {
    SliceProfile p;
    p.slice = s;
    switch (s) {
      case Slice::embb:
        p.params = {{"on_s", 2.0}, {"off_mean_s", 1.0}, {"rate_mbps", 8.0}, {"pkt_bytes", 1400.0}};
        break;
      case Slice::urllc:
        p.params = {{"pkt_per_s", 50.0}, {"pkt_bytes", 200.0}, {"jitter_ms", 2.0}, {"bidirectional", 1.0}};
        break;
      case Slice::mmtc:
        p.params = {{"burst_interval_s", 10.0}, {"burst_pkts_min", 5.0},  {"burst_pkts_max", 20.0},
                    {"pkt_bytes_min", 100.0},   {"pkt_bytes_max", 400.0}, {"dl_fraction", 0.5}};
        break;
    }
    return p;
  }

  void validate() const {
    for (const auto& [k, v] : params) {
      if (k == "on_s" || k == "off_mean_s" || k == "burst_interval_s") {
        if (v <= 0) throw std::invalid_argument("SliceProfile: " + k + " must be > 0");
      } else if (v < 0) {
        throw std::invalid_argument("SliceProfile: " + k + " must be >= 0");
      }
    }
    if (slice == Slice::mmtc) {
      if (get("burst_pkts_min") > get("burst_pkts_max") || get("pkt_bytes_min") > get("pkt_bytes_max"))
        throw std::invalid_argument("SliceProfile: mmtc min/max ranges inverted");
      if (get("dl_fraction") > 1.0) throw std::invalid_argument("SliceProfile: dl_fraction must be in [0,1]");
    }
  }
};

/// Byte/packet totals for one 250 ms period.
struct PeriodArrivals {
  std::int64_t period_idx = 0;
  std::int64_t dl_bytes = 0;
  std::int64_t ul_bytes = 0;
  int dl_pkts = 0;
  int ul_pkts = 0;
};

namespace detail {

inline void emit(Trace& t, double t_ms, double bytes, Direction d, std::int64_t end_ms) {
  std::int64_t ts = static_cast<std::int64_t>(std::floor(t_ms));
  if (ts < 0) ts = 0;
  if (ts >= end_ms) return;
  std::int64_t b = std::llround(bytes);
  if (b < 1) b = 1;
  t.push_back(TraceEvent{ts, b, d});
}

inline Trace generate_embb(const SliceProfile& p, std::int64_t end_ms, std::mt19937_64& rng) {
  Trace out;
  const double on_ms = p.get("on_s") * 1000.0;
  const double pkt_bytes = p.get("pkt_bytes");
  const double rate_bps = p.get("rate_mbps") * 1e6;
  if (rate_bps == 0 || pkt_bytes == 0) return out;
  const double pkt_interval_ms = pkt_bytes * 8.0 / rate_bps * 1000.0;
  std::exponential_distribution<double> off_ms(1.0 / (p.get("off_mean_s") * 1000.0));
  double t = 0.0;
  while (t < static_cast<double>(end_ms)) {
    const double on_end = t + on_ms;
    for (double tp = t; tp < on_end && tp < static_cast<double>(end_ms); tp += pkt_interval_ms)
      emit(out, tp, pkt_bytes, Direction::downlink, end_ms);
    t = on_end + off_ms(rng);
  }
  return out;
}

inline Trace generate_urllc(const SliceProfile& p, std::int64_t end_ms, std::mt19937_64& rng) {
  Trace out;
  const double pkt_per_s = p.get("pkt_per_s");
  if (pkt_per_s == 0) return out;
  const double interval_ms = 1000.0 / pkt_per_s;
  const double jitter = p.get("jitter_ms");
  const bool bidir = p.get("bidirectional") != 0.0;
  std::uniform_real_distribution<double> jit(-jitter, jitter);
  for (double base = 0.0; base < static_cast<double>(end_ms); base += interval_ms) {
    emit(out, base + (jitter > 0 ? jit(rng) : 0.0), p.get("pkt_bytes"), Direction::downlink, end_ms);
    if (bidir) emit(out, base + (jitter > 0 ? jit(rng) : 0.0), p.get("pkt_bytes"), Direction::uplink, end_ms);
  }
  return out;
}

inline Trace generate_mmtc(const SliceProfile& p, std::int64_t end_ms, std::mt19937_64& rng) {
  Trace out;
  std::exponential_distribution<double> gap_ms(1.0 / (p.get("burst_interval_s") * 1000.0));
  std::uniform_int_distribution<int> n_pkts(static_cast<int>(p.get("burst_pkts_min")),
                                            static_cast<int>(p.get("burst_pkts_max")));
  std::uniform_int_distribution<int> pkt_bytes(static_cast<int>(p.get("pkt_bytes_min")),
                                               static_cast<int>(p.get("pkt_bytes_max")));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double dl_fraction = p.get("dl_fraction");
  double t = gap_ms(rng);
  while (t < static_cast<double>(end_ms)) {
    const int n = n_pkts(rng);
    for (int i = 0; i < n; ++i) {
      const Direction d = coin(rng) < dl_fraction ? Direction::downlink : Direction::uplink;
      emit(out, t + 2.0 * i, pkt_bytes(rng), d, end_ms);  // 2 ms intra-burst spacing
    }
    t += gap_ms(rng);
  }
  return out;
}

}  // namespace detail

// Pure function of (profile, duration, seed).
inline Trace generate_trace(const SliceProfile& profile, double duration_s, std::uint64_t seed) {
  if (duration_s < 0) throw std::invalid_argument("generate_trace: duration_s must be >= 0");
  profile.validate();
  const std::int64_t end_ms = static_cast<std::int64_t>(std::llround(duration_s * 1000.0));
  if (end_ms == 0) return {};
  auto rng = make_rng(seed, {static_cast<std::uint64_t>(profile.slice)});
  Trace out;
  switch (profile.slice) {
    case Slice::embb: out = detail::generate_embb(profile, end_ms, rng); break;
    case Slice::urllc: out = detail::generate_urllc(profile, end_ms, rng); break;
    case Slice::mmtc: out = detail::generate_mmtc(profile, end_ms, rng); break;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TraceEvent& a, const TraceEvent& b) { return a.t_ms < b.t_ms; });
  return out;
}

// Splits into 2-minute sub-traces, each rebased to t = 0. Pass duration_s when
// the trace's intended span is known (a sparse trace may end long before it);
// otherwise the span is inferred from the last event. The tail shorter than
// chunk_s is dropped so every chunk covers the full chunk duration.
inline std::vector<Trace> chunk_trace(const Trace& trace, double chunk_s = 120.0, double duration_s = -1.0) {
  if (chunk_s <= 0) throw std::invalid_argument("chunk_trace: chunk_s must be > 0");
  if (trace.empty() && duration_s < 0) return {};
  const std::int64_t chunk_ms = static_cast<std::int64_t>(std::llround(chunk_s * 1000.0));
  const std::int64_t span_ms =
      duration_s >= 0 ? static_cast<std::int64_t>(std::llround(duration_s * 1000.0)) : trace.back().t_ms + 1;
  const std::int64_t n_chunks = span_ms / chunk_ms;
  std::vector<Trace> out(static_cast<std::size_t>(n_chunks));
  for (const TraceEvent& ev : trace) {
    const std::int64_t c = ev.t_ms / chunk_ms;
    if (c >= n_chunks) break;  // trailing remainder
    out[static_cast<std::size_t>(c)].push_back(TraceEvent{ev.t_ms - c * chunk_ms, ev.bytes, ev.direction});
  }
  return out;
}

// One entry per period over [0, last_event_period]; half-open buckets, so an
// event at exactly t = k*period_ms lands in period k.
inline std::vector<PeriodArrivals> arrivals_by_period(const Trace& trace, std::int64_t period_ms = 250) {
  if (period_ms <= 0) throw std::invalid_argument("arrivals_by_period: period_ms must be > 0");
  if (trace.empty()) return {};
  const std::int64_t n_periods = trace.back().t_ms / period_ms + 1;
  std::vector<PeriodArrivals> out(static_cast<std::size_t>(n_periods));
  for (std::int64_t i = 0; i < n_periods; ++i) out[static_cast<std::size_t>(i)].period_idx = i;
  for (const TraceEvent& ev : trace) {
    auto& p = out[static_cast<std::size_t>(ev.t_ms / period_ms)];
    if (ev.direction == Direction::downlink) {
      p.dl_bytes += ev.bytes;
      p.dl_pkts += 1;
    } else {
      p.ul_bytes += ev.bytes;
      p.ul_pkts += 1;
    }
  }
  return out;
}

// ---- trace file I/O: CSV with header t_ms,bytes,direction ----

inline void write_trace_csv(const Trace& trace, std::ostream& os) {
  os << "t_ms,bytes,direction\n";
  for (const TraceEvent& ev : trace)
    os << ev.t_ms << ',' << ev.bytes << ',' << (ev.direction == Direction::downlink ? "downlink" : "uplink")
       << '\n';
}

inline void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_trace_csv: cannot open " + path);
  write_trace_csv(trace, f);
}

inline Trace read_trace_csv(std::istream& is) {
  Trace out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_trace_csv: empty file");
  if (line != "t_ms,bytes,direction")
    throw std::runtime_error("read_trace_csv: expected header t_ms,bytes,direction, got: " + line);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string t, b, d;
    if (!std::getline(ss, t, ',') || !std::getline(ss, b, ',') || !std::getline(ss, d))
      throw std::runtime_error("read_trace_csv: malformed line " + std::to_string(lineno));
    TraceEvent ev;
    ev.t_ms = std::stoll(t);
    ev.bytes = std::stoll(b);
    if (d == "downlink" || d == "dl")
      ev.direction = Direction::downlink;
    else if (d == "uplink" || d == "ul")
      ev.direction = Direction::uplink;
    else
      throw std::runtime_error("read_trace_csv: bad direction on line " + std::to_string(lineno) + ": " + d);
    if (ev.t_ms < 0 || ev.bytes < 1)
      throw std::runtime_error("read_trace_csv: invalid event on line " + std::to_string(lineno));
    if (!out.empty() && ev.t_ms < out.back().t_ms)
      throw std::runtime_error("read_trace_csv: events out of order at line " + std::to_string(lineno));
    out.push_back(ev);
  }
  return out;
}

inline Trace read_trace_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_trace_csv: cannot open " + path);
  return read_trace_csv(f);
}

}  // namespace slicebench
