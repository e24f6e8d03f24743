#pragma once

#include <algorithm>
#include <stdexcept>

#include "slicebench/env.hpp"

namespace slicebench {

/// Constants of the per-slice performance functions. kappa converts queued
/// bytes to megabits so the eMBB score mixes units consistently with
/// tx_brate * T (megabits served per period).
struct ScoreConstants {
  double alpha = 1.0 / 3.0;
  double beta = 1.5;
  double gamma_delay = 1.0;  // max allowable RAN delay, seconds
  double period_s = 0.25;
  double kappa = 8.0 / 1e6;

  void validate() const {
    if (alpha <= 0 || beta <= 0 || gamma_delay <= 0 || period_s <= 0 || kappa <= 0)
      throw std::invalid_argument("ScoreConstants: all constants must be > 0");
  }
};

inline double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

// Net megabits drained from (positive) or added to (negative) the downlink
// queue, scaled and offset into [0,1].
inline double score_embb(double tx_brate_mbps, double dl_buffer_bytes, const ScoreConstants& c) {
  return clip01(c.alpha * (c.beta + tx_brate_mbps * c.period_s - dl_buffer_bytes * c.kappa));
}

// Queueing-delay proxy: time a bit spends in the downlink buffer at the
// current service rate. Zero rate with backlog is the worst case; zero rate
// with an empty buffer means no RAN-induced latency at all.
inline double score_urllc(double tx_brate_mbps, double dl_buffer_bytes, const ScoreConstants& c) {
  if (tx_brate_mbps <= 0.0) return dl_buffer_bytes <= 0.0 ? 1.0 : 0.0;
  const double delay_s = dl_buffer_bytes * 8.0 / (tx_brate_mbps * 1e6);
  return std::max(0.0, c.gamma_delay - delay_s) / c.gamma_delay;
}

// Utilization when active; when idle, rewards keeping the allocation small.
inline double score_mmtc(double prb_req, double prb_granted, int slice_prb, const ScoreConstants&) {
  if (slice_prb < 1) throw std::domain_error("score_mmtc: slice_prb must be >= 1");
  if (prb_req <= 0.0) return 1.0 / static_cast<double>(slice_prb);
  return std::min(1.0, prb_granted / prb_req);
}

inline double slice_score(Slice s, const SliceKpis& k, const ScoreConstants& c) {
  switch (s) {
    case Slice::embb: return score_embb(k.tx_brate_mbps, k.dl_buffer_bytes, c);
    case Slice::urllc: return score_urllc(k.tx_brate_mbps, k.dl_buffer_bytes, c);
    case Slice::mmtc:
      return score_mmtc(static_cast<double>(k.prb_req), static_cast<double>(k.prb_granted), k.slice_prb, c);
  }
  return 0.0;
}

// MDP reward: the average slice score for the period following the action.
// Aggregate slice KPIs equal the per-user average under equal sharing.
inline double reward(const KpiFrame& frame, const ScoreConstants& c) {
  double sum = 0.0;
  for (Slice s : kSlices) sum += slice_score(s, frame.of(s), c);
  return sum / 3.0;
}

}  // namespace slicebench
