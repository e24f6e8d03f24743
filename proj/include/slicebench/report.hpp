#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "slicebench/pipeline.hpp"

namespace slicebench {

namespace detail {

inline std::string fmt4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

inline std::string tuple_str(const UserTuple& t) {
  return std::to_string(t.n_mmtc) + ", " + std::to_string(t.n_urllc) + ", " + std::to_string(t.n_embb);
}

}  // namespace detail

// Per-tuple deployed-policy table for one epoch.
inline std::string render_tuple_table(const EpochReport& er) {
  std::ostringstream os;
  os << "Epoch " << er.epoch << " (deployed: " << er.deployed << ")\n";
  os << "Users      | Mean   | CV     | Trials\n";
  os << "-----------+--------+--------+-------\n";
  for (const auto& tr : er.tuples) {
    std::string cv = tr.has_stats ? detail::fmt4(tr.stats.cv) : "-";
    os << std::left << std::setw(10) << detail::tuple_str(tr.users) << " | " << detail::fmt4(tr.mean) << " | "
       << std::setw(6) << cv << " | " << tr.trial_scores.size() << "\n";
  }
  os << "mean over common tuples: " << detail::fmt4(er.mean_common) << "\n";
  os << "candidates:";
  for (const auto& [id, be] : er.candidate_bes) os << " " << id << " BE=" << detail::fmt4(be);
  os << " -> selected " << er.selected << "\n";
  return os.str();
}

// Policy-vs-baseline comparison over the four common evaluation tuples.
inline std::string render_comparison_table(const FinalEval& fe) {
  std::ostringstream os;
  os << "Final policy (" << fe.policy_id << ") vs baselines\n";
  os << "Users      | Policy Mean | Policy CV | Expert Mean | Expert CV | Random Mean | Random CV\n";
  os << "-----------+-------------+-----------+-------------+-----------+-------------+----------\n";
  for (size_t i = 0; i < fe.tuples.size(); ++i) {
    os << std::left << std::setw(10) << detail::tuple_str(fe.tuples[i]);
    for (const auto& pe : fe.per_tuple[i]) {
      std::string cv = pe.has_stats ? detail::fmt4(pe.stats.cv) : "-";
      os << " | " << std::setw(11) << detail::fmt4(pe.mean) << " | " << std::setw(9) << cv;
    }
    os << "\n";
  }
  os << "final-policy mean over the nine common tuples: " << detail::fmt4(fe.mean_common) << "\n";
  return os.str();
}

inline std::string render_summary(const std::vector<EpochReport>& epochs, const FinalEval* fe) {
  std::ostringstream os;
  for (const auto& er : epochs) os << render_tuple_table(er) << "\n";
  if (fe) os << render_comparison_table(*fe);
  return os.str();
}

}  // namespace slicebench
