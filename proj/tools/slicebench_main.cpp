#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slicebench/classifier.hpp"
#include "slicebench/config.hpp"
#include "slicebench/labeled_data.hpp"
#include "slicebench/pipeline.hpp"
#include "slicebench/report.hpp"

namespace fs = std::filesystem;
using namespace slicebench;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// `--section.key value` tokens are config overrides; CLI11 sees the rest.
std::vector<std::string> extract_overrides(int argc, char** argv, GlobalOpts& g) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    std::string tok = argv[i];
    if (tok.rfind("--", 0) == 0 && tok.find('.') != std::string::npos) {
      std::string key = tok.substr(2);
      std::string value;
      auto eq = key.find('=');
      if (eq != std::string::npos) {
        value = key.substr(eq + 1);
        key = key.substr(0, eq);
      } else if (i + 1 < argc) {
        value = argv[++i];
      } else {
        throw std::invalid_argument("override " + tok + " needs a value");
      }
      g.overrides.emplace_back(key, value);
      continue;
    }
    args.push_back(tok);
  }
  return args;
}

Config resolve_config(const GlobalOpts& g) {
  Config cfg = g.config_path.empty() ? Config{} : Config::from_file(g.config_path);
  for (const auto& [k, v] : g.overrides) cfg.set(k, v);
  if (g.seed) cfg.set("run.seed", std::to_string(*g.seed));
  if (g.out_dir) cfg.set("run.out_dir", *g.out_dir);
  if (g.jobs) cfg.set("run.jobs", std::to_string(*g.jobs));
  return cfg;
}

void write_config_echo(const Config& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream f(fs::path(out_dir) / "config_resolved.ini", std::ios::binary);
  f << cfg.render();
}

UserTuple parse_tuple(const std::string& s) {
  int vals[3];
  size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    size_t next = i < 2 ? s.find(',', pos) : s.size();
    if (next == std::string::npos) throw std::invalid_argument("tuple must be m,u,e");
    vals[i] = std::stoi(s.substr(pos, next - pos));
    pos = next + 1;
  }
  UserTuple t{vals[0], vals[1], vals[2]};
  if (!t.valid()) throw std::invalid_argument("invalid tuple: " + s);
  return t;
}

Policy load_policy_arg(const std::string& arg, uint64_t seed) {
  if (arg == "random") return make_random_policy(seed);
  if (arg == "expert") return make_expert_policy();
  return load_policy(arg);
}

int cmd_gen_traces(const Config& cfg, double duration_s) {
  PipelineConfig p = build_pipeline_config(cfg);
  write_config_echo(cfg, p.out_dir);
  for (Slice s : kSlices) {
    Trace tr = generate_trace(p.profiles[static_cast<size_t>(s)], duration_s,
                              derive_seed(p.seed, {0x6Eu, static_cast<uint64_t>(s)}));
    fs::path out = fs::path(p.out_dir) / (std::string("trace_") + slice_name(s) + ".csv");
    write_trace_csv(tr, out.string());
    std::cout << out.string() << ": " << tr.size() << " events over " << duration_s << " s\n";
  }
  return 0;
}

int cmd_episode(const Config& cfg, const std::string& tuple_str, const std::string& policy_arg, double epsilon) {
  PipelineConfig p = build_pipeline_config(cfg);
  write_config_echo(cfg, p.out_dir);
  UserTuple tuple = parse_tuple(tuple_str);
  Policy policy = load_policy_arg(policy_arg, derive_seed(p.seed, {0xA0u}));
  TracePool pool = TracePool::build(p.profiles, p.episode_seconds(), p.pool_chunks, p.seed);
  EpisodeResult res = run_episode(policy, tuple, derive_seed(p.seed, {0xE0u, 1, 0}), p, pool, 1, 0, epsilon);
  write_transitions_jsonl(res.transitions, (fs::path(p.out_dir) / "transitions.jsonl").string());
  if (p.write_kpis) write_kpi_csv(res.kpis, (fs::path(p.out_dir) / "kpis.csv").string());
  std::cout << "episode: " << res.transitions.size() << " transitions, mean score "
            << detail::fmt4(res.mean_score) << "\n";
  return 0;
}

int cmd_train(const Config& cfg, const std::string& data_path, const std::string& kind) {
  PipelineConfig p = build_pipeline_config(cfg);
  write_config_echo(cfg, p.out_dir);
  auto data = read_transitions_jsonl(data_path);
  std::cout << "loaded " << data.size() << " transitions from " << data_path << "\n";
  Hyperparams hp = p.hp;
  if (kind == "tabular" || kind == "both") {
    QTable q = tabular_train(data, hp);
    fs::path out = fs::path(p.out_dir) / "policy_tabular.bin";
    save_policy(make_tabular_policy(std::move(q), hp), out.string());
    std::cout << "wrote " << out.string() << "\n";
  }
  if (kind == "deepq" || kind == "both") {
    QNetwork n = dqn_train(data, hp);
    fs::path out = fs::path(p.out_dir) / "policy_deepq.bin";
    save_policy(make_deepq_policy(std::move(n), hp), out.string());
    std::cout << "wrote " << out.string() << "\n";
  }
  return 0;
}

int cmd_select(const Config& cfg, const std::string& data_path, const std::vector<std::string>& policy_paths,
               double split_ratio) {
  PipelineConfig p = build_pipeline_config(cfg);
  write_config_echo(cfg, p.out_dir);
  auto data = read_transitions_jsonl(data_path);
  std::vector<Transition> val = data;
  if (split_ratio > 0.0) {
    auto [train, v] = split_dataset(data, split_ratio, derive_seed(p.seed, {0x5Eu}));
    val = v;
    std::cout << "split: " << train.size() << " train / " << val.size() << " validation transitions\n";
  }
  std::vector<Policy> policies;
  std::vector<QFunctionRef> cands;
  for (const auto& path : policy_paths) policies.push_back(load_policy(path));
  for (size_t i = 0; i < policies.size(); ++i) {
    const Policy& pol = policies[i];
    if (pol.kind == PolicyKind::tabular)
      cands.push_back(QFunctionRef::from(*pol.table, policy_paths[i]));
    else if (pol.kind == PolicyKind::deepq)
      cands.push_back(QFunctionRef::from(*pol.net, policy_paths[i]));
    else
      throw std::invalid_argument("select: policy has no Q-function: " + policy_paths[i]);
  }
  SelectionResult sel = select_policy(cands, val, p.hp.discount);
  ordered_json j;
  j["candidates"] = ordered_json::array();
  for (size_t i = 0; i < cands.size(); ++i) {
    j["candidates"].push_back(ordered_json{{"id", cands[i].id}, {"bellman_error", sel.errors[i]}});
    std::cout << cands[i].id << ": BE " << sel.errors[i] << "\n";
  }
  j["selected"] = cands[sel.selected].id;
  std::ofstream f(fs::path(p.out_dir) / "selection.json", std::ios::binary);
  f << j.dump(2) << "\n";
  std::cout << "selected: " << cands[sel.selected].id << "\n";
  return 0;
}

int cmd_pipeline(const Config& cfg) {
  PipelineConfig p = build_pipeline_config(cfg);
  write_config_echo(cfg, p.out_dir);
  PipelineResult res = train_test_improve(p);
  std::string summary = render_summary(res.epochs, &res.final_eval);
  std::ofstream f(fs::path(p.out_dir) / "summary.txt", std::ios::binary);
  f << summary;
  std::cout << summary;
  return 0;
}

int cmd_classify_train(const Config& cfg, const std::string& data_dir, int gen_trials) {
  PipelineConfig p = build_pipeline_config(cfg);
  write_config_echo(cfg, p.out_dir);
  if (gen_trials > 0) {
    generate_labeled_trials(p, data_dir, gen_trials);
    std::cout << "generated " << gen_trials << " trials per class in " << data_dir << "\n";
  }
  const int t_size = cfg.get_int("classifier.t_size");
  CnnHyperparams hp = build_cnn_hyperparams(cfg);
  auto files = read_manifest(data_dir);
  auto [train_files, test_files] = split_files(files, cfg.get_double("classifier.split_ratio"), p.seed);
  auto train_raw = load_windows(train_files, t_size, static_cast<size_t>(cfg.get_int("classifier.cap_per_class")),
                                derive_seed(p.seed, {0xC5u}));
  if (train_raw.empty()) throw std::runtime_error("no training windows built from " + data_dir);
  NormStats stats = fit_normalizer(train_raw);
  std::vector<Window> train;
  train.reserve(train_raw.size());
  for (const auto& w : train_raw) train.push_back(apply_normalizer(stats, w));
  std::cout << "training on " << train.size() << " windows (" << train_files.size() << " trials), T=" << t_size
            << "\n";
  CnnModel model = train_cnn(train, t_size, hp);
  model.norm() = stats;
  fs::path out = fs::path(p.out_dir) / ("model_t" + std::to_string(t_size) + ".bin");
  save_model(model, out.string());
  auto train_metrics = evaluate(model, train, false);
  std::cout << "wrote " << out.string() << " (train accuracy " << detail::fmt4(train_metrics.accuracy) << ", "
            << test_files.size() << " trials held out for classify-eval)\n";
  return 0;
}

int cmd_classify_eval(const Config& cfg, const std::string& data_dir, const std::string& model_path, bool with_itr,
                      const std::string& subset) {
  PipelineConfig p = build_pipeline_config(cfg);
  write_config_echo(cfg, p.out_dir);
  CnnModel model = load_model(model_path);
  if (model.norm().min.size() != kNumKpiColumns) throw std::runtime_error("model has no normalization stats");
  auto files = read_manifest(data_dir);
  std::vector<LabeledFile> chosen;
  if (subset == "all") {
    chosen = files;
  } else {
    auto [train_files, test_files] = split_files(files, cfg.get_double("classifier.split_ratio"), p.seed);
    chosen = subset == "train" ? train_files : test_files;
  }
  std::vector<Window> windows;
  for (const auto& lf : chosen)
    for (auto& w : windows_from_file(lf, model.t_size())) windows.push_back(apply_normalizer(model.norm(), w));
  ClassifierMetrics met = evaluate(model, windows, with_itr, cfg.get_double("classifier.itr_threshold"));

  ordered_json j;
  j["t_size"] = model.t_size();
  j["subset"] = subset;
  j["itr"] = with_itr;
  j["n_windows"] = met.n;
  j["accuracy"] = met.accuracy;
  ordered_json pc;
  for (int c = 0; c < kNumClasses; ++c) pc[kClassNames[static_cast<size_t>(c)]] = met.per_class[static_cast<size_t>(c)];
  j["per_class_accuracy"] = pc;
  j["mean_inference_ms"] = met.mean_inference_ms;
  std::ofstream mf(fs::path(p.out_dir) / "classify_metrics.json", std::ios::binary);
  mf << j.dump(2) << "\n";

  std::ofstream cf(fs::path(p.out_dir) / "confusion.csv", std::ios::binary);
  cf << "truth\\pred";
  for (const auto& n : kClassNames) cf << "," << n;
  cf << "\n";
  for (int c = 0; c < kNumClasses; ++c) {
    cf << kClassNames[static_cast<size_t>(c)];
    for (int q = 0; q < kNumClasses; ++q) cf << "," << met.confusion[static_cast<size_t>(c)][static_cast<size_t>(q)];
    cf << "\n";
  }
  std::cout << "accuracy " << detail::fmt4(met.accuracy) << " over " << met.n << " windows (subset " << subset
            << (with_itr ? ", ITR on" : "") << "), mean inference " << met.mean_inference_ms << " ms\n";
  return 0;
}

int cmd_report(const Config& cfg, const std::string& format) {
  PipelineConfig p = build_pipeline_config(cfg);
  fs::path rpath = fs::path(p.out_dir) / "reports.json";
  std::ifstream in(rpath);
  if (!in) throw std::runtime_error("no reports.json under " + p.out_dir + " (run pipeline first)");
  ordered_json top = ordered_json::parse(in);
  std::vector<EpochReport> epochs;
  for (const auto& e : top.at("epochs")) epochs.push_back(epoch_report_from_json(e));
  if (format == "json") {
    std::cout << top.dump(2) << "\n";
    return 0;
  }
  FinalEval fe;
  const FinalEval* fep = nullptr;
  if (top.contains("final_eval")) {
    const auto& fj = top.at("final_eval");
    fe.policy_id = fj.at("policy");
    fe.mean_common = fj.at("mean_common");
    for (const auto& row : fj.at("comparison")) {
      auto u = row.at("users");
      fe.tuples.push_back(UserTuple{u.at(0), u.at(1), u.at(2)});
      std::array<PolicyEval, 3> evs{policy_eval_from_json(row.at("policy")), policy_eval_from_json(row.at("expert")),
                                    policy_eval_from_json(row.at("random"))};
      fe.per_tuple.push_back(std::move(evs));
    }
    fep = &fe;
  }
  std::string summary = render_summary(epochs, fep);
  std::ofstream f(fs::path(p.out_dir) / "summary.txt", std::ios::binary);
  f << summary;
  std::cout << summary;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOpts g;
  std::vector<std::string> args;
  try {
    args = extract_overrides(argc, argv, g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"network slice RL workbench"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may appear after the subcommand
  app.add_option("-c,--config", g.config_path, "config file (INI sections, see README)");
  uint64_t seed_opt = 0;
  std::string out_opt;
  int jobs_opt = 0;
  auto* seed_o = app.add_option("--seed", seed_opt, "root seed (overrides run.seed)");
  auto* out_o = app.add_option("--out-dir", out_opt, "output directory (overrides run.out_dir)");
  auto* jobs_o = app.add_option("--jobs", jobs_opt, "parallel trial collection (overrides run.jobs)");

  auto* gen = app.add_subcommand("gen-traces", "generate per-slice traffic trace CSVs");
  double duration_s = 120.0;
  gen->add_option("--duration", duration_s, "trace duration in seconds");

  auto* episode = app.add_subcommand("episode", "run one 480-period trial under a policy");
  std::string ep_tuple = "1,2,3", ep_policy = "random";
  double ep_epsilon = 0.0;
  episode->add_option("--tuple", ep_tuple, "user tuple m,u,e");
  episode->add_option("--policy", ep_policy, "random | expert | path to policy file");
  episode->add_option("--epsilon", ep_epsilon, "exploration rate");

  auto* train = app.add_subcommand("train", "train agents offline from a transition log");
  std::string tr_data, tr_kind = "both";
  train->add_option("--data", tr_data, "transitions.jsonl")->required();
  train->add_option("--kind", tr_kind, "tabular | deepq | both")->check(CLI::IsMember({"tabular", "deepq", "both"}));

  auto* select = app.add_subcommand("select", "rank saved policies by validation Bellman error");
  std::string se_data;
  std::vector<std::string> se_policies;
  double se_split = 0.0;
  select->add_option("--data", se_data, "transitions.jsonl used as validation data")->required();
  select->add_option("--policy", se_policies, "policy file (repeatable)")->required();
  select->add_option("--split-ratio", se_split, "if > 0, split the data and validate on the held-out part");

  app.add_subcommand("pipeline", "full train-test-improve loop with per-epoch artifacts");

  auto* ctrain = app.add_subcommand("classify-train", "train the KPI-window traffic classifier");
  std::string ct_dir;
  int ct_gen = 0;
  ctrain->add_option("--data-dir", ct_dir, "labeled KPI dataset directory")->required();
  ctrain->add_option("--gen-trials", ct_gen, "generate this many simulator trials per class first");

  auto* ceval = app.add_subcommand("classify-eval", "evaluate a saved classifier model");
  std::string ce_dir, ce_model, ce_subset = "test";
  bool ce_itr = false;
  ceval->add_option("--data-dir", ce_dir, "labeled KPI dataset directory")->required();
  ceval->add_option("--model", ce_model, "model file from classify-train")->required();
  ceval->add_flag("--itr", ce_itr, "declare idle windows ctrl and classify only active ones");
  ceval->add_option("--subset", ce_subset, "test | train | all")->check(CLI::IsMember({"test", "train", "all"}));

  auto* report = app.add_subcommand("report", "render pipeline reports");
  std::string rp_format = "text";
  report->add_option("--format", rp_format, "text | json")->check(CLI::IsMember({"text", "json"}));

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (seed_o->count()) g.seed = seed_opt;
  if (out_o->count()) g.out_dir = out_opt;
  if (jobs_o->count()) g.jobs = jobs_opt;

  try {
    Config cfg = resolve_config(g);
    if (gen->parsed()) return cmd_gen_traces(cfg, duration_s);
    if (episode->parsed()) return cmd_episode(cfg, ep_tuple, ep_policy, ep_epsilon);
    if (train->parsed()) return cmd_train(cfg, tr_data, tr_kind);
    if (select->parsed()) return cmd_select(cfg, se_data, se_policies, se_split);
    if (app.get_subcommand("pipeline")->parsed()) return cmd_pipeline(cfg);
    if (ctrain->parsed()) return cmd_classify_train(cfg, ct_dir, ct_gen);
    if (ceval->parsed()) return cmd_classify_eval(cfg, ce_dir, ce_model, ce_itr, ce_subset);
    if (report->parsed()) return cmd_report(cfg, rp_format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
