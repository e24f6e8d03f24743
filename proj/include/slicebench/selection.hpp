#pragma once

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slicebench/agents.hpp"
#include "slicebench/mdp.hpp"
#include "slicebench/rng.hpp"

namespace slicebench {

// Type-erased Q-function view so tabular and network candidates can sit in
// one candidate list.
struct QFunctionRef {
  std::string id;
  std::function<double(const State&, int)> value;
  std::function<double(const State&)> max_valid;

  static QFunctionRef from(const QTable& q, std::string id = "tabular") {
    return {std::move(id), [&q](const State& s, int a) { return q.value(s, a); },
            [&q](const State& s) { return q.max_valid(s); }};
  }
  static QFunctionRef from(const QNetwork& n, std::string id = "deepq") {
    return {std::move(id), [&n](const State& s, int a) { return n.value(s, a); },
            [&n](const State& s) { return n.max_valid(s); }};
  }
};

// Mean absolute one-step TD residual over a held-out transition set.
inline double bellman_error(const QFunctionRef& q, const std::vector<Transition>& validation, double discount) {
  if (validation.empty()) throw std::invalid_argument("bellman_error: empty validation set");
  if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("discount must be in [0,1)");
  double acc = 0.0;
  for (const Transition& t : validation)
    acc += std::abs(q.value(t.s, t.a) - (t.r + discount * q.max_valid(t.s_next)));
  return acc / static_cast<double>(validation.size());
}

template <class Q>
double bellman_error(const Q& q, const std::vector<Transition>& validation, double discount) {
  return bellman_error(QFunctionRef::from(q), validation, discount);
}

struct SelectionResult {
  size_t selected = 0;
  std::vector<double> errors;  // one per candidate, candidate order
};

// Lowest validation Bellman error wins; ties go to the earlier candidate.
inline SelectionResult select_policy(const std::vector<QFunctionRef>& candidates,
                                     const std::vector<Transition>& validation, double discount) {
  if (candidates.empty()) throw std::invalid_argument("select_policy: no candidates");
  SelectionResult res;
  res.errors.reserve(candidates.size());
  for (const auto& c : candidates) res.errors.push_back(bellman_error(c, validation, discount));
  res.selected = static_cast<size_t>(
      std::min_element(res.errors.begin(), res.errors.end()) - res.errors.begin());
  return res;
}

// Trial-granular split: every transition of a given (epoch, trial) episode
// lands wholly in train or wholly in validation.
inline std::pair<std::vector<Transition>, std::vector<Transition>> split_dataset(
    const std::vector<Transition>& all, double train_ratio, uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw std::invalid_argument("train_ratio must be in (0,1)");
  if (all.empty()) throw std::invalid_argument("split_dataset: empty dataset");
  std::map<std::pair<int, int>, int> groups;  // (epoch, trial) -> group index
  std::vector<std::pair<int, int>> keys;
  for (const Transition& t : all) {
    auto key = std::make_pair(t.epoch, t.trial);
    if (groups.emplace(key, static_cast<int>(keys.size())).second) keys.push_back(key);
  }
  const size_t n_trials = keys.size();
  if (n_trials < 2) throw std::invalid_argument("split_dataset: need at least two trials");
  size_t n_train = static_cast<size_t>(std::llround(train_ratio * static_cast<double>(n_trials)));
  n_train = std::clamp<size_t>(n_train, 1, n_trials - 1);

  std::vector<size_t> order(n_trials);
  std::iota(order.begin(), order.end(), size_t{0});
  auto rng = make_rng(seed, {0x5Bu});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> in_train(n_trials, false);
  for (size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  std::pair<std::vector<Transition>, std::vector<Transition>> out;
  for (const Transition& t : all) {
    int g = groups.at(std::make_pair(t.epoch, t.trial));
    (in_train[static_cast<size_t>(g)] ? out.first : out.second).push_back(t);
  }
  return out;
}

inline double t_quantile_975(int dof) {
  if (dof < 1) throw std::invalid_argument("dof must be >= 1");
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.975);
}

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1)
  double cv = 0.0;
  double ci_halfwidth = 0.0;  // two-sided 95% Student-t
  int n_trials = 0;
};

inline EvalStats eval_stats(const std::vector<double>& trial_scores) {
  const int n = static_cast<int>(trial_scores.size());
  if (n < 2) throw std::invalid_argument("eval_stats: need at least two trials");
  double mean = std::accumulate(trial_scores.begin(), trial_scores.end(), 0.0) / n;
  if (!(mean > 0.0)) throw std::invalid_argument("eval_stats: mean must be positive");
  double ss = 0.0;
  for (double v : trial_scores) ss += (v - mean) * (v - mean);
  EvalStats st;
  st.n_trials = n;
  st.mean = mean;
  st.stddev = std::sqrt(ss / (n - 1));
  st.cv = st.stddev / mean;
  st.ci_halfwidth = t_quantile_975(n - 1) * st.stddev / std::sqrt(static_cast<double>(n));
  return st;
}

// Smallest additional trial count so the projected t-CI halfwidth (holding
// mean and stddev fixed) drops to `target` as a fraction of the mean.
inline int required_trials(const EvalStats& st, double target = 0.10) {
  if (!(target > 0.0)) throw std::invalid_argument("target must be > 0");
  if (st.n_trials < 2) throw std::invalid_argument("required_trials: stats need n >= 2");
  if (!(st.mean > 0.0)) throw std::invalid_argument("required_trials: mean must be positive");
  const double bound = target * st.mean;
  auto halfwidth = [&](int n) { return t_quantile_975(n - 1) * st.stddev / std::sqrt(static_cast<double>(n)); };
  if (st.stddev == 0.0 || halfwidth(st.n_trials) <= bound) return 0;
  // Normal-approximation start, then settle on the exact smallest n.
  int n = std::max<int>(st.n_trials + 1,
                        static_cast<int>(std::ceil(std::pow(1.959963984540054 * st.stddev / bound, 2.0))));
  while (halfwidth(n) > bound) ++n;
  while (n - 1 > st.n_trials && halfwidth(n - 1) <= bound) --n;
  return n - st.n_trials;
}

}  // namespace slicebench
