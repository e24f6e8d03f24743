#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "slicebench/mdp.hpp"
#include "slicebench/traffic.hpp"

namespace slicebench {

/// Downlink backlog of one slice. Internal accounting is in bits; bytes only
/// appear at the KPI boundary.
struct SliceQueueState {
  std::int64_t dl_buffer_bits = 0;

  double dl_buffer_bytes() const { return static_cast<double>(dl_buffer_bits) / 8.0; }
};

/// Per-slice aggregates for one period; the per-UE KPI rows are derived from
/// these by equal sharing.
struct SliceKpis {
  double tx_brate_mbps = 0.0;
  double dl_buffer_bytes = 0.0;
  std::int64_t prb_req = 0;      // PRB-subframe grants demanded this period
  std::int64_t prb_granted = 0;  // grants given, capped by slice capacity
  int slice_prb = 0;             // PRBs currently allocated to the slice
  int n_users = 0;
  // carried through for KPI emission
  std::int64_t dl_bytes = 0;
  std::int64_t ul_bytes = 0;
  int dl_pkts = 0;
  int ul_pkts = 0;
  double rx_brate_mbps = 0.0;
};

struct KpiFrame {
  std::int64_t period_idx = 0;
  std::array<SliceKpis, 3> slices;  // indexed by Slice

  const SliceKpis& of(Slice s) const { return slices[static_cast<std::size_t>(s)]; }
  SliceKpis& of(Slice s) { return slices[static_cast<std::size_t>(s)]; }
};

/// Stationary distributions for the radio KPIs the queue model does not
/// produce (Table-style columns like CQI, MCS, SINR).
struct RadioKpiModel {
  struct Gauss {
    double mean = 0, stddev = 0, lo = 0, hi = 0;
    double sample(std::mt19937_64& rng) const {
      std::normal_distribution<double> d(mean, stddev);
      double v = d(rng);
      return v < lo ? lo : (v > hi ? hi : v);
    }
  };
  Gauss dl_cqi{15.0, 0.5, 1.0, 15.0};
  Gauss dl_mcs{26.0, 1.0, 0.0, 28.0};
  Gauss ul_mcs{22.0, 1.0, 0.0, 28.0};
  Gauss ul_sinr{25.0, 2.0, 0.0, 40.0};
  Gauss phr{30.0, 2.0, 0.0, 63.0};
  Gauss ul_turbo_iters{1.5, 0.2, 0.5, 6.0};
  Gauss rx_errors_up_perc{0.5, 0.25, 0.0, 100.0};
};

struct EnvConfig {
  int bits_per_prb_subframe = 350;  // mid-range MCS; 17.5 Mbps at 50 PRBs
  int period_ms = 250;
  RadioKpiModel radio;

  double period_s() const { return period_ms / 1000.0; }
};

// n_prbs PRBs, one grant opportunity per 1 ms subframe.
inline std::int64_t capacity_bits(int n_prbs, int bits_per_prb_subframe, int period_ms = 250) {
  if (n_prbs < 0) throw std::invalid_argument("capacity_bits: n_prbs must be >= 0");
  return static_cast<std::int64_t>(n_prbs) * period_ms * bits_per_prb_subframe;
}

// One period of the per-slice queue recursion: serve up to capacity, carry
// the rest. Flow conservation holds exactly in bits.
inline std::pair<SliceQueueState, SliceKpis> step_slice(const SliceQueueState& state,
                                                        const PeriodArrivals& arrivals, int slice_prbs,
                                                        const EnvConfig& cfg) {
  if (slice_prbs < 1)
    throw std::invalid_argument("step_slice: every slice keeps at least 1 PRB (min 1 Rb rule)");
  const std::int64_t cap = capacity_bits(slice_prbs, cfg.bits_per_prb_subframe, cfg.period_ms);
  const std::int64_t demand_bits = state.dl_buffer_bits + arrivals.dl_bytes * 8;
  const std::int64_t served_bits = std::min(demand_bits, cap);

  SliceQueueState next;
  next.dl_buffer_bits = demand_bits - served_bits;

  SliceKpis k;
  k.tx_brate_mbps = static_cast<double>(served_bits) / cfg.period_s() / 1e6;
  k.dl_buffer_bytes = next.dl_buffer_bytes();
  k.prb_req = (demand_bits + cfg.bits_per_prb_subframe - 1) / cfg.bits_per_prb_subframe;
  k.prb_granted = std::min<std::int64_t>(k.prb_req, static_cast<std::int64_t>(slice_prbs) * cfg.period_ms);
  k.slice_prb = slice_prbs;
  k.dl_bytes = arrivals.dl_bytes;
  k.ul_bytes = arrivals.ul_bytes;
  k.dl_pkts = arrivals.dl_pkts;
  k.ul_pkts = arrivals.ul_pkts;
  // uplink is not queued; it is reported as served within the period
  k.rx_brate_mbps = static_cast<double>(arrivals.ul_bytes) * 8.0 / cfg.period_s() / 1e6;
  return {next, k};
}

using SliceQueues = std::array<SliceQueueState, 3>;
using SliceArrivals = std::array<PeriodArrivals, 3>;

inline std::pair<SliceQueues, KpiFrame> step_env(const SliceQueues& queues, const SliceArrivals& arrivals,
                                                 const RbAllocation& rb_alloc, const UserTuple& users,
                                                 std::int64_t period_idx, const EnvConfig& cfg) {
  const std::array<int, 3> prbs = prbs_of(rb_alloc);
  SliceQueues next;
  KpiFrame frame;
  frame.period_idx = period_idx;
  for (Slice s : kSlices) {
    const auto i = static_cast<std::size_t>(s);
    auto [q, k] = step_slice(queues[i], arrivals[i], prbs[i], cfg);
    k.n_users = users.count(s);
    next[i] = q;
    frame.slices[i] = k;
  }
  return {next, frame};
}

// ---- KPI records (Table-style rows, one per UE per period) ----

inline constexpr int kNumKpiColumns = 17;

inline constexpr std::array<const char*, 17> kKpiColumns = {
    "dl_mcs",          "dl_n_samples", "dl_buffer_bytes",  "tx_brate_downlink_Mbps",
    "tx_pkts_downlink", "dl_cqi",      "ul_mcs",           "ul_n_samples",
    "ul_buffer_bytes", "rx_brate_uplink_Mbps", "rx_pkts_uplink", "rx_errors_up_perc",
    "ul_sinr",         "phr",          "sum_reqsted_prbs", "sum_granted_prbs",
    "ul_turbo_iters"};

struct KpiRecord {
  std::int64_t timestamp_ms = 0;
  int ue_id = 0;
  int slice_id = 0;  // 0 mMTC, 1 URLLC, 2 eMBB
  std::array<double, 17> kpi{};

  double get(const std::string& name) const {
    for (std::size_t i = 0; i < kKpiColumns.size(); ++i)
      if (name == kKpiColumns[i]) return kpi[i];
    throw std::invalid_argument("KpiRecord: unknown column " + name);
  }
};

struct UeMap {
  std::array<std::vector<int>, 3> ue_ids;  // indexed by Slice

  static UeMap from_tuple(const UserTuple& users) {
    UeMap m;
    int next_id = 0;
    for (Slice s : kSlices)
      for (int i = 0; i < users.count(s); ++i) m.ue_ids[static_cast<std::size_t>(s)].push_back(next_id++);
    return m;
  }
};

// Slice aggregates shared equally among the slice's UEs; unmodeled radio KPIs
// are drawn from the configured stationary distributions.
inline std::vector<KpiRecord> emit_kpi_records(const KpiFrame& frame, const UeMap& ue_map,
                                               const EnvConfig& cfg, std::mt19937_64& rng) {
  std::vector<KpiRecord> out;
  for (Slice s : kSlices) {
    const SliceKpis& k = frame.of(s);
    const auto& ues = ue_map.ue_ids[static_cast<std::size_t>(s)];
    if (ues.empty()) continue;
    const double share = 1.0 / static_cast<double>(ues.size());
    for (int ue : ues) {
      KpiRecord r;
      r.timestamp_ms = frame.period_idx * cfg.period_ms;
      r.ue_id = ue;
      r.slice_id = static_cast<int>(s);
      const RadioKpiModel& m = cfg.radio;
      r.kpi = {
          m.dl_mcs.sample(rng),
          static_cast<double>(k.dl_pkts) * share,  // dl_n_samples
          k.dl_buffer_bytes * share,
          k.tx_brate_mbps * share,
          static_cast<double>(k.dl_pkts) * share,  // tx_pkts_downlink
          m.dl_cqi.sample(rng),
          m.ul_mcs.sample(rng),
          static_cast<double>(k.ul_pkts) * share,  // ul_n_samples
          0.0,                                     // ul_buffer_bytes: uplink not queued
          k.rx_brate_mbps * share,
          static_cast<double>(k.ul_pkts) * share,  // rx_pkts_uplink
          k.ul_pkts > 0 ? m.rx_errors_up_perc.sample(rng) : 0.0,
          m.ul_sinr.sample(rng),
          m.phr.sample(rng),
          static_cast<double>(k.prb_req) * share,
          static_cast<double>(k.prb_granted) * share,
          m.ul_turbo_iters.sample(rng),
      };
      out.push_back(r);
    }
  }
  return out;
}

inline void write_kpi_csv_header(std::ostream& os) {
  os << "timestamp_ms,ue_id,slice_id";
  for (const char* c : kKpiColumns) os << ',' << c;
  os << '\n';
}

inline void write_kpi_csv_row(std::ostream& os, const KpiRecord& r) {
  os << r.timestamp_ms << ',' << r.ue_id << ',' << r.slice_id;
  for (double v : r.kpi) os << ',' << v;
  os << '\n';
}

inline void write_kpi_csv(const std::vector<KpiRecord>& records, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_kpi_csv: cannot open " + path);
  f.precision(10);
  write_kpi_csv_header(f);
  for (const auto& r : records) write_kpi_csv_row(f, r);
}

inline std::vector<KpiRecord> read_kpi_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_kpi_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_kpi_csv: empty file " + path);
  std::vector<KpiRecord> out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    KpiRecord r;
    std::size_t pos = 0;
    auto next_field = [&]() {
      const std::size_t comma = line.find(',', pos);
      std::string field = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      pos = comma == std::string::npos ? line.size() : comma + 1;
      return field;
    };
    try {
      r.timestamp_ms = std::stoll(next_field());
      r.ue_id = std::stoi(next_field());
      r.slice_id = std::stoi(next_field());
      for (double& v : r.kpi) v = std::stod(next_field());
    } catch (const std::exception&) {
      throw std::runtime_error("read_kpi_csv: malformed line " + std::to_string(lineno) + " in " + path);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace slicebench
