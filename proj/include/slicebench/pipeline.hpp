#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "slicebench/agents.hpp"
#include "slicebench/env.hpp"
#include "slicebench/mdp.hpp"
#include "slicebench/rng.hpp"
#include "slicebench/scoring.hpp"
#include "slicebench/selection.hpp"
#include "slicebench/traffic.hpp"

namespace slicebench {

using ordered_json = nlohmann::ordered_json;

inline const std::array<UserTuple, 9> kCommonTuples{{{0, 1, 2},
                                                     {0, 2, 2},
                                                     {1, 1, 2},
                                                     {1, 1, 4},
                                                     {1, 2, 1},
                                                     {1, 2, 3},
                                                     {1, 2, 5},
                                                     {1, 3, 4},
                                                     {3, 2, 3}}};

// The four common tuples used for the policy-vs-baseline comparison.
inline const std::array<UserTuple, 4> kComparisonTuples{{{0, 1, 2}, {0, 2, 2}, {1, 1, 4}, {1, 2, 3}}};

inline bool is_common_tuple(const UserTuple& t) {
  return std::find(kCommonTuples.begin(), kCommonTuples.end(), t) != kCommonTuples.end();
}

struct PipelineConfig {
  uint64_t seed = 1;
  int epochs = 4;
  int trials_per_common = 3;
  int extra_tuples = 5;
  int trials_per_extra = 1;
  int episode_periods = 480;
  double collect_epsilon = 0.05;
  double split_ratio = 0.8;
  int topup_cap = 10;
  double ci_target = 0.10;
  int eval_trials = 3;
  RbAllocation init_rbs{5, 6};
  int pool_chunks = 8;
  int jobs = 1;
  bool write_kpis = true;
  std::string out_dir;  // empty disables persistence
  EnvConfig env;
  ScoreConstants score;
  Hyperparams hp;
  std::array<SliceProfile, 3> profiles{SliceProfile::defaults(Slice::mmtc), SliceProfile::defaults(Slice::urllc),
                                       SliceProfile::defaults(Slice::embb)};

  double episode_seconds() const { return episode_periods * env.period_ms / 1000.0; }

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (trials_per_common < 1) throw std::invalid_argument("trials_per_common must be >= 1");
    if (extra_tuples < 0) throw std::invalid_argument("extra_tuples must be >= 0");
    if (trials_per_extra < 0) throw std::invalid_argument("trials_per_extra must be >= 0");
    if (episode_periods < 1) throw std::invalid_argument("episode_periods must be >= 1");
    if (!(collect_epsilon >= 0.0 && collect_epsilon <= 1.0)) throw std::invalid_argument("collect_epsilon in [0,1]");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw std::invalid_argument("split_ratio in (0,1)");
    if (topup_cap < 0) throw std::invalid_argument("topup_cap must be >= 0");
    if (!(ci_target > 0.0)) throw std::invalid_argument("ci_target must be > 0");
    if (eval_trials < 2) throw std::invalid_argument("eval_trials must be >= 2");
    if (!init_rbs.valid()) throw std::invalid_argument("init_rbs invalid");
    if (pool_chunks < 1) throw std::invalid_argument("pool_chunks must be >= 1");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    hp.validate();
    score.validate();
    for (const auto& p : profiles) p.validate();
  }
};

// Fixed library of per-slice trace chunks; each episode UE replays one chunk
// picked by seed. Shared read-only across concurrent trials.
struct TracePool {
  std::array<std::vector<Trace>, 3> chunks;

  static TracePool build(const std::array<SliceProfile, 3>& profiles, double chunk_s, int n_chunks, uint64_t seed) {
    TracePool pool;
    for (int si = 0; si < 3; ++si) {
      Trace full = generate_trace(profiles[static_cast<size_t>(si)], chunk_s * n_chunks,
                                  derive_seed(seed, {0x9Cu, static_cast<uint64_t>(si)}));
      pool.chunks[static_cast<size_t>(si)] = chunk_trace(full, chunk_s, chunk_s * n_chunks);
      if (pool.chunks[static_cast<size_t>(si)].empty())
        pool.chunks[static_cast<size_t>(si)].push_back({});  // idle profile: one empty chunk
    }
    return pool;
  }

  const Trace& pick(Slice s, std::mt19937_64& rng) const {
    const auto& v = chunks[static_cast<size_t>(s)];
    std::uniform_int_distribution<size_t> d(0, v.size() - 1);
    return v[d(rng)];
  }
};

struct EpisodeResult {
  std::vector<Transition> transitions;
  double mean_score = 0.0;
  std::vector<KpiRecord> kpis;
};

// One 2-minute trial: every 250 ms observe, act (epsilon-greedy), apply the
// Rb transfer, serve the queues, and score the resulting frame.
inline EpisodeResult run_episode(const Policy& policy, const UserTuple& tuple, uint64_t seed,
                                 const PipelineConfig& cfg, const TracePool& pool, int epoch, int trial,
                                 double epsilon) {
  if (!tuple.valid()) throw std::invalid_argument("run_episode: invalid user tuple");
  Policy actor = policy;
  if (actor.kind == PolicyKind::random) actor.reseed(derive_seed(seed, {0x01u}));
  auto pick_rng = make_rng(seed, {0x02u});
  auto eps_rng = make_rng(seed, {0x03u});
  auto kpi_rng = make_rng(seed, {0x04u});

  const int P = cfg.episode_periods;
  UeMap ue_map = UeMap::from_tuple(tuple);

  // Per-slice arrival streams: sum of each member UE's replayed chunk.
  std::array<std::vector<PeriodArrivals>, 3> slice_arrivals;
  for (auto& v : slice_arrivals) v.assign(static_cast<size_t>(P), PeriodArrivals{});
  for (int si = 0; si < 3; ++si)
    for (size_t p = 0; p < static_cast<size_t>(P); ++p) slice_arrivals[static_cast<size_t>(si)][p].period_idx = static_cast<int>(p);
  for (Slice s : kSlices) {
    for (size_t i = 0; i < ue_map.ue_ids[static_cast<size_t>(s)].size(); ++i) {
      const Trace& chunk = pool.pick(s, pick_rng);
      auto per_period = arrivals_by_period(chunk, cfg.env.period_ms);
      auto& agg = slice_arrivals[static_cast<size_t>(s)];
      for (size_t p = 0; p < per_period.size() && p < agg.size(); ++p) {
        agg[p].dl_bytes += per_period[p].dl_bytes;
        agg[p].ul_bytes += per_period[p].ul_bytes;
        agg[p].dl_pkts += per_period[p].dl_pkts;
        agg[p].ul_pkts += per_period[p].ul_pkts;
      }
    }
  }

  EpisodeResult res;
  res.transitions.reserve(static_cast<size_t>(P));
  std::array<SliceQueueState, 3> queues{};
  RbAllocation rbs = cfg.init_rbs;
  double score_sum = 0.0;
  for (int t = 0; t < P; ++t) {
    State s{tuple, rbs};
    int a = act_epsilon(actor, s, epsilon, eps_rng);
    RbAllocation next = apply_action(rbs, a);
    std::array<PeriodArrivals, 3> arr{slice_arrivals[0][static_cast<size_t>(t)],
                                      slice_arrivals[1][static_cast<size_t>(t)],
                                      slice_arrivals[2][static_cast<size_t>(t)]};
    auto [q2, frame] = step_env(queues, arr, next, tuple, t, cfg.env);
    queues = q2;
    double r = reward(frame, cfg.score);
    res.transitions.push_back(Transition{s, a, State{tuple, next}, r, epoch, trial, t});
    score_sum += r;
    rbs = next;
    if (cfg.write_kpis) {
      auto rows = emit_kpi_records(frame, ue_map, cfg.env, kpi_rng);
      res.kpis.insert(res.kpis.end(), rows.begin(), rows.end());
    }
  }
  res.mean_score = score_sum / P;
  return res;
}

inline std::vector<UserTuple> sample_extra_tuples(int n, uint64_t seed) {
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  std::vector<UserTuple> universe;
  for (const auto& t : enumerate_user_tuples())
    if (!is_common_tuple(t)) universe.push_back(t);
  auto rng = make_rng(seed, {0xE7u});
  std::shuffle(universe.begin(), universe.end(), rng);
  universe.resize(std::min<size_t>(static_cast<size_t>(n), universe.size()));
  return universe;
}

struct TupleReport {
  UserTuple users{};
  bool common = true;
  std::vector<double> trial_scores;
  double mean = 0.0;
  bool has_stats = false;
  EvalStats stats;
  int topup_added = 0;
};

struct EpochReport {
  int epoch = 0;
  std::string deployed;
  std::vector<std::pair<std::string, double>> candidate_bes;
  std::string selected;
  uint64_t dataset_before = 0, dataset_added = 0, dataset_after = 0;
  std::vector<TupleReport> tuples;
  double mean_common = 0.0;  // mean of trial scores over common tuples
};

struct PolicyEval {
  std::string id;
  std::vector<double> scores;
  double mean = 0.0;
  bool has_stats = false;
  EvalStats stats;
};

struct FinalEval {
  std::string policy_id;
  double mean_common = 0.0;  // selected policy over the nine common tuples
  std::vector<UserTuple> tuples;
  std::vector<std::array<PolicyEval, 3>> per_tuple;  // selected, expert, random
};

struct PipelineResult {
  std::vector<EpochReport> epochs;
  Policy final_policy;
  std::vector<Transition> dataset;
  FinalEval final_eval;
};

// ---- JSON (de)serialization of reports and transition logs ----

inline ordered_json transition_to_json(const Transition& t) {
  ordered_json j;
  j["s"] = {t.s.users.n_mmtc, t.s.users.n_urllc, t.s.users.n_embb, t.s.rbs.rb_mmtc, t.s.rbs.rb_urllc};
  j["a"] = t.a;
  j["r"] = t.r;
  j["sp"] = {t.s_next.users.n_mmtc, t.s_next.users.n_urllc, t.s_next.users.n_embb, t.s_next.rbs.rb_mmtc,
             t.s_next.rbs.rb_urllc};
  j["epoch"] = t.epoch;
  j["tuple"] = {t.s.users.n_mmtc, t.s.users.n_urllc, t.s.users.n_embb};
  j["trial"] = t.trial;
  j["period"] = t.period;
  return j;
}

inline Transition transition_from_json(const ordered_json& j) {
  Transition t;
  auto s = j.at("s");
  auto sp = j.at("sp");
  t.s = State{UserTuple{s.at(0), s.at(1), s.at(2)}, RbAllocation{s.at(3), s.at(4)}};
  t.s_next = State{UserTuple{sp.at(0), sp.at(1), sp.at(2)}, RbAllocation{sp.at(3), sp.at(4)}};
  t.a = j.at("a");
  t.r = j.at("r");
  t.epoch = j.at("epoch");
  t.trial = j.at("trial");
  t.period = j.at("period");
  return t;
}

inline void write_transitions_jsonl(const std::vector<Transition>& ts, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  for (const Transition& t : ts) out << transition_to_json(t).dump() << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<Transition> read_transitions_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::vector<Transition> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(transition_from_json(ordered_json::parse(line)));
  }
  return out;
}

inline ordered_json stats_to_json(const EvalStats& st) {
  return ordered_json{{"mean", st.mean},
                      {"stddev", st.stddev},
                      {"cv", st.cv},
                      {"ci_halfwidth", st.ci_halfwidth},
                      {"n_trials", st.n_trials}};
}

inline EvalStats stats_from_json(const ordered_json& j) {
  EvalStats st;
  st.mean = j.at("mean");
  st.stddev = j.at("stddev");
  st.cv = j.at("cv");
  st.ci_halfwidth = j.at("ci_halfwidth");
  st.n_trials = j.at("n_trials");
  return st;
}

inline ordered_json tuple_report_to_json(const TupleReport& tr) {
  ordered_json j;
  j["users"] = {tr.users.n_mmtc, tr.users.n_urllc, tr.users.n_embb};
  j["common"] = tr.common;
  j["trial_scores"] = tr.trial_scores;
  j["mean"] = tr.mean;
  j["topup_added"] = tr.topup_added;
  if (tr.has_stats) j["stats"] = stats_to_json(tr.stats);
  return j;
}

inline TupleReport tuple_report_from_json(const ordered_json& j) {
  TupleReport tr;
  auto u = j.at("users");
  tr.users = UserTuple{u.at(0), u.at(1), u.at(2)};
  tr.common = j.at("common");
  tr.trial_scores = j.at("trial_scores").get<std::vector<double>>();
  tr.mean = j.at("mean");
  tr.topup_added = j.at("topup_added");
  if (j.contains("stats")) {
    tr.has_stats = true;
    tr.stats = stats_from_json(j.at("stats"));
  }
  return tr;
}

inline ordered_json epoch_report_to_json(const EpochReport& er) {
  ordered_json j;
  j["epoch"] = er.epoch;
  j["deployed"] = er.deployed;
  ordered_json cands = ordered_json::array();
  for (const auto& [id, be] : er.candidate_bes) cands.push_back(ordered_json{{"id", id}, {"bellman_error", be}});
  j["candidates"] = cands;
  j["selected"] = er.selected;
  j["dataset"] = ordered_json{{"before", er.dataset_before}, {"added", er.dataset_added}, {"after", er.dataset_after}};
  ordered_json tuples = ordered_json::array();
  for (const auto& tr : er.tuples) tuples.push_back(tuple_report_to_json(tr));
  j["tuples"] = tuples;
  j["mean_common"] = er.mean_common;
  return j;
}

inline EpochReport epoch_report_from_json(const ordered_json& j) {
  EpochReport er;
  er.epoch = j.at("epoch");
  er.deployed = j.at("deployed");
  for (const auto& c : j.at("candidates")) er.candidate_bes.emplace_back(c.at("id"), c.at("bellman_error"));
  er.selected = j.at("selected");
  er.dataset_before = j.at("dataset").at("before");
  er.dataset_added = j.at("dataset").at("added");
  er.dataset_after = j.at("dataset").at("after");
  for (const auto& t : j.at("tuples")) er.tuples.push_back(tuple_report_from_json(t));
  er.mean_common = j.at("mean_common");
  return er;
}

inline ordered_json policy_eval_to_json(const PolicyEval& pe) {
  ordered_json j;
  j["id"] = pe.id;
  j["scores"] = pe.scores;
  j["mean"] = pe.mean;
  if (pe.has_stats) j["stats"] = stats_to_json(pe.stats);
  return j;
}

inline PolicyEval policy_eval_from_json(const ordered_json& j) {
  PolicyEval pe;
  pe.id = j.at("id");
  pe.scores = j.at("scores").get<std::vector<double>>();
  pe.mean = j.at("mean");
  if (j.contains("stats")) {
    pe.has_stats = true;
    pe.stats = stats_from_json(j.at("stats"));
  }
  return pe;
}

inline ordered_json final_eval_to_json(const FinalEval& fe) {
  ordered_json j;
  j["policy"] = fe.policy_id;
  j["mean_common"] = fe.mean_common;
  ordered_json rows = ordered_json::array();
  for (size_t i = 0; i < fe.tuples.size(); ++i) {
    ordered_json row;
    row["users"] = {fe.tuples[i].n_mmtc, fe.tuples[i].n_urllc, fe.tuples[i].n_embb};
    for (const auto& pe : fe.per_tuple[i]) row[pe.id] = policy_eval_to_json(pe);
    rows.push_back(row);
  }
  j["comparison"] = rows;
  return j;
}

// ---- Epoch orchestration ----

namespace detail {

struct TrialSpec {
  UserTuple tuple;
  size_t tuple_idx = 0;
  bool common = true;
  int trial = 0;
  uint64_t seed = 0;
};

// Run trials in plan order, optionally across threads; results come back in
// plan order regardless of scheduling so downstream output is deterministic.
inline std::vector<EpisodeResult> run_trials(const std::vector<TrialSpec>& plan, const Policy& policy,
                                             const PipelineConfig& cfg, const TracePool& pool, int epoch,
                                             double epsilon) {
  std::vector<EpisodeResult> results(plan.size());
  if (cfg.jobs <= 1 || plan.size() <= 1) {
    for (size_t i = 0; i < plan.size(); ++i)
      results[i] = run_episode(policy, plan[i].tuple, plan[i].seed, cfg, pool, epoch, plan[i].trial, epsilon);
    return results;
  }
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= plan.size()) return;
      results[i] = run_episode(policy, plan[i].tuple, plan[i].seed, cfg, pool, epoch, plan[i].trial, epsilon);
    }
  };
  std::vector<std::future<void>> futs;
  int n_workers = std::min<int>(cfg.jobs, static_cast<int>(plan.size()));
  futs.reserve(static_cast<size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) futs.push_back(std::async(std::launch::async, worker));
  for (auto& f : futs) f.get();
  return results;
}

inline uint64_t trial_seed(const PipelineConfig& cfg, int epoch, int trial) {
  return derive_seed(cfg.seed, {0xE0u, static_cast<uint64_t>(epoch), static_cast<uint64_t>(trial)});
}

}  // namespace detail

struct EpochOutputs {
  Policy selected;
  Policy tabular;
  Policy deepq;
  std::vector<KpiRecord> kpis;
  std::vector<int> kpi_trials;  // parallel to kpis: source trial index
  bool collect_kpis = false;
};

// Collect under the deployed policy, train both candidates, select by
// validation Bellman error, then top up noisy tuples.
inline EpochReport run_epoch(const PipelineConfig& cfg, int epoch, const Policy& deployed,
                             const std::string& deployed_id, std::vector<Transition>& dataset,
                             const TracePool& pool, EpochOutputs* outputs = nullptr) {
  std::vector<KpiRecord>* kpi_sink = outputs && outputs->collect_kpis ? &outputs->kpis : nullptr;
  std::vector<int>* kpi_trial_ids = outputs && outputs->collect_kpis ? &outputs->kpi_trials : nullptr;
  cfg.validate();
  EpochReport report;
  report.epoch = epoch;
  report.deployed = deployed_id;
  report.dataset_before = dataset.size();

  std::vector<UserTuple> tuples(kCommonTuples.begin(), kCommonTuples.end());
  auto extras = sample_extra_tuples(cfg.extra_tuples, derive_seed(cfg.seed, {0xE1u, static_cast<uint64_t>(epoch)}));
  tuples.insert(tuples.end(), extras.begin(), extras.end());

  report.tuples.resize(tuples.size());
  for (size_t i = 0; i < tuples.size(); ++i) {
    report.tuples[i].users = tuples[i];
    report.tuples[i].common = i < kCommonTuples.size();
  }

  std::vector<detail::TrialSpec> plan;
  int trial = 0;
  for (size_t i = 0; i < tuples.size(); ++i) {
    bool common = i < kCommonTuples.size();
    int reps = common ? cfg.trials_per_common : cfg.trials_per_extra;
    for (int k = 0; k < reps; ++k)
      plan.push_back({tuples[i], i, common, trial, detail::trial_seed(cfg, epoch, trial)}), ++trial;
  }

  auto results = detail::run_trials(plan, deployed, cfg, pool, epoch, cfg.collect_epsilon);
  for (size_t i = 0; i < plan.size(); ++i) {
    dataset.insert(dataset.end(), results[i].transitions.begin(), results[i].transitions.end());
    report.tuples[plan[i].tuple_idx].trial_scores.push_back(results[i].mean_score);
    if (kpi_sink) {
      kpi_sink->insert(kpi_sink->end(), results[i].kpis.begin(), results[i].kpis.end());
      if (kpi_trial_ids) kpi_trial_ids->insert(kpi_trial_ids->end(), results[i].kpis.size(), plan[i].trial);
    }
  }

  // Train candidates on everything collected so far.
  auto [train, val] = split_dataset(dataset, cfg.split_ratio, derive_seed(cfg.seed, {0xE2u, static_cast<uint64_t>(epoch)}));
  Hyperparams hp = cfg.hp;
  hp.seed = derive_seed(cfg.seed, {0xE3u, static_cast<uint64_t>(epoch)});
  QTable qt = tabular_train(train, hp);
  QNetwork qn = dqn_train(train, hp);
  std::vector<QFunctionRef> cands{QFunctionRef::from(qt), QFunctionRef::from(qn)};
  SelectionResult sel = select_policy(cands, val, hp.discount);
  for (size_t i = 0; i < cands.size(); ++i) report.candidate_bes.emplace_back(cands[i].id, sel.errors[i]);
  report.selected = cands[sel.selected].id;
  if (outputs) {
    outputs->tabular = make_tabular_policy(std::move(qt), hp);
    outputs->deepq = make_deepq_policy(std::move(qn), hp);
    outputs->selected = sel.selected == 0 ? outputs->tabular : outputs->deepq;
  }

  // Top up tuples whose deployed-policy CI is too wide.
  for (size_t i = 0; i < report.tuples.size(); ++i) {
    TupleReport& tr = report.tuples[i];
    auto scores_ok = [&] { return tr.trial_scores.size() >= 2 && std::accumulate(tr.trial_scores.begin(), tr.trial_scores.end(), 0.0) > 0.0; };
    if (!scores_ok()) {
      tr.mean = tr.trial_scores.empty()
                    ? 0.0
                    : std::accumulate(tr.trial_scores.begin(), tr.trial_scores.end(), 0.0) / tr.trial_scores.size();
      continue;
    }
    EvalStats st = eval_stats(tr.trial_scores);
    int want = std::min(required_trials(st, cfg.ci_target), cfg.topup_cap);
    if (want > 0) {
      std::vector<detail::TrialSpec> extra_plan;
      for (int k = 0; k < want; ++k)
        extra_plan.push_back({tuples[i], i, tr.common, trial, detail::trial_seed(cfg, epoch, trial)}), ++trial;
      auto extra_results = detail::run_trials(extra_plan, deployed, cfg, pool, epoch, cfg.collect_epsilon);
      for (size_t k = 0; k < extra_plan.size(); ++k) {
        dataset.insert(dataset.end(), extra_results[k].transitions.begin(), extra_results[k].transitions.end());
        tr.trial_scores.push_back(extra_results[k].mean_score);
        if (kpi_sink) {
          kpi_sink->insert(kpi_sink->end(), extra_results[k].kpis.begin(), extra_results[k].kpis.end());
          if (kpi_trial_ids)
            kpi_trial_ids->insert(kpi_trial_ids->end(), extra_results[k].kpis.size(), extra_plan[k].trial);
        }
      }
      tr.topup_added = want;
      st = eval_stats(tr.trial_scores);
    }
    tr.stats = st;
    tr.has_stats = true;
    tr.mean = st.mean;
  }

  double sum = 0.0;
  size_t n = 0;
  for (const auto& tr : report.tuples)
    if (tr.common) {
      for (double v : tr.trial_scores) sum += v;
      n += tr.trial_scores.size();
    }
  report.mean_common = n ? sum / static_cast<double>(n) : 0.0;
  report.dataset_after = dataset.size();
  report.dataset_added = report.dataset_after - report.dataset_before;
  return report;
}

// Greedy evaluation runs (no exploration, no dataset growth).
inline std::vector<double> evaluate_policy(const Policy& policy, const UserTuple& tuple, int n_trials, uint64_t seed,
                                           const PipelineConfig& cfg, const TracePool& pool) {
  std::vector<double> scores;
  scores.reserve(static_cast<size_t>(n_trials));
  PipelineConfig quiet = cfg;
  quiet.write_kpis = false;
  for (int k = 0; k < n_trials; ++k) {
    auto r = run_episode(policy, tuple, derive_seed(seed, {0xEAu, static_cast<uint64_t>(k)}), quiet, pool, 0, k, 0.0);
    scores.push_back(r.mean_score);
  }
  return scores;
}

inline PolicyEval make_policy_eval(std::string id, std::vector<double> scores) {
  PolicyEval pe;
  pe.id = std::move(id);
  pe.scores = std::move(scores);
  pe.mean = std::accumulate(pe.scores.begin(), pe.scores.end(), 0.0) / static_cast<double>(pe.scores.size());
  if (pe.scores.size() >= 2 && pe.mean > 0.0) {
    pe.stats = eval_stats(pe.scores);
    pe.has_stats = true;
  }
  return pe;
}

// Post-run comparison of the last selected policy against the static expert
// and random baselines on the comparison tuples, plus its mean over all nine
// common tuples.
inline FinalEval final_evaluation(const Policy& policy, const std::string& policy_id, const PipelineConfig& cfg,
                                  const TracePool& pool) {
  FinalEval fe;
  fe.policy_id = policy_id;
  Policy expert = make_expert_policy();
  Policy random = make_random_policy(derive_seed(cfg.seed, {0xF1u}));
  double sum = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < kCommonTuples.size(); ++i) {
    auto scores = evaluate_policy(policy, kCommonTuples[i], cfg.eval_trials,
                                  derive_seed(cfg.seed, {0xF2u, static_cast<uint64_t>(i)}), cfg, pool);
    for (double v : scores) sum += v;
    n += scores.size();
    auto it = std::find(kComparisonTuples.begin(), kComparisonTuples.end(), kCommonTuples[i]);
    if (it != kComparisonTuples.end()) {
      fe.tuples.push_back(kCommonTuples[i]);
      std::array<PolicyEval, 3> row{
          make_policy_eval("policy", scores),
          make_policy_eval("expert", evaluate_policy(expert, kCommonTuples[i], cfg.eval_trials,
                                                     derive_seed(cfg.seed, {0xF3u, static_cast<uint64_t>(i)}), cfg,
                                                     pool)),
          make_policy_eval("random", evaluate_policy(random, kCommonTuples[i], cfg.eval_trials,
                                                     derive_seed(cfg.seed, {0xF4u, static_cast<uint64_t>(i)}), cfg,
                                                     pool))};
      fe.per_tuple.push_back(std::move(row));
    }
  }
  fe.mean_common = n ? sum / static_cast<double>(n) : 0.0;
  return fe;
}

// Full train-test-improve loop with per-epoch artifacts and resume. If the
// output directory already holds a complete epoch_<k>, that epoch is replayed
// from disk instead of recomputed.
inline PipelineResult train_test_improve(const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  TracePool pool = TracePool::build(cfg.profiles, cfg.episode_seconds(), cfg.pool_chunks, cfg.seed);

  PipelineResult out;
  Policy deployed = make_random_policy(derive_seed(cfg.seed, {0xA0u}));
  std::string deployed_id = "random";

  const bool persist = !cfg.out_dir.empty();
  if (persist) fs::create_directories(cfg.out_dir);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    fs::path edir = fs::path(cfg.out_dir) / ("epoch_" + std::to_string(epoch));
    fs::path tpath = edir / "transitions.jsonl";
    fs::path rpath = edir / "report.json";
    if (persist && fs::exists(tpath) && fs::exists(rpath)) {
      auto prior = read_transitions_jsonl(tpath.string());
      out.dataset.insert(out.dataset.end(), prior.begin(), prior.end());
      std::ifstream rin(rpath);
      EpochReport er = epoch_report_from_json(ordered_json::parse(rin));
      deployed = load_policy((edir / ("policy_" + er.selected + ".bin")).string());
      deployed_id = er.selected;
      out.epochs.push_back(std::move(er));
      continue;
    }

    size_t ds_before = out.dataset.size();
    EpochOutputs outs;
    outs.collect_kpis = cfg.write_kpis && persist;
    EpochReport er = run_epoch(cfg, epoch, deployed, deployed_id, out.dataset, pool, &outs);
    if (persist) {
      fs::create_directories(edir / "kpis");
      std::vector<Transition> added(out.dataset.begin() + static_cast<std::ptrdiff_t>(ds_before), out.dataset.end());
      write_transitions_jsonl(added, tpath.string());
      save_policy(outs.tabular, (edir / "policy_tabular.bin").string());
      save_policy(outs.deepq, (edir / "policy_deepq.bin").string());
      std::ofstream rout(rpath, std::ios::binary);
      rout << epoch_report_to_json(er).dump(2) << "\n";
      if (outs.collect_kpis && !outs.kpis.empty()) {
        std::map<int, std::vector<KpiRecord>> by_trial;
        for (size_t i = 0; i < outs.kpis.size(); ++i) by_trial[outs.kpi_trials[i]].push_back(outs.kpis[i]);
        for (auto& [tid, rows] : by_trial)
          write_kpi_csv(rows, (edir / "kpis" / ("trial_" + std::to_string(tid) + ".csv")).string());
      }
    }
    deployed = std::move(outs.selected);
    deployed_id = er.selected;
    out.epochs.push_back(std::move(er));
  }

  out.final_policy = deployed;
  out.final_eval = final_evaluation(deployed, deployed_id, cfg, pool);
  if (persist) {
    ordered_json top;
    top["epochs"] = ordered_json::array();
    for (const auto& er : out.epochs) top["epochs"].push_back(epoch_report_to_json(er));
    top["final_eval"] = final_eval_to_json(out.final_eval);
    std::ofstream rout(fs::path(cfg.out_dir) / "reports.json", std::ios::binary);
    rout << top.dump(2) << "\n";
  }
  return out;
}

}  // namespace slicebench
