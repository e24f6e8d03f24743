#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "slicebench/classifier.hpp"
#include "slicebench/pipeline.hpp"

namespace slicebench {

namespace detail {

// value types: i=int, u=uint64, d=double, b=bool, s=string
// constraints: 0 none, 1 >0, 2 >=0, 3 [0,1], 4 >=1, 5 (0,1)
struct ConfigEntry {
  const char* key;
  const char* def;
  char type;
  int constraint;
};

inline const std::vector<ConfigEntry>& config_schema() {
  static const std::vector<ConfigEntry> schema{
      {"run.seed", "1", 'u', 0},
      {"run.out_dir", "out", 's', 0},
      {"run.jobs", "0", 'i', 2},  // 0 = all available cores
      {"env.bits_per_prb_subframe", "350", 'i', 1},
      {"env.period_ms", "250", 'i', 1},
      {"score.alpha", "0.3333333333333333", 'd', 1},
      {"score.beta", "1.5", 'd', 1},
      {"score.gamma_delay", "1", 'd', 1},
      {"score.kappa", "8e-06", 'd', 1},
      {"agent.tabular_lr", "0.1", 'd', 1},
      {"agent.tabular_tol", "0.0001", 'd', 1},
      {"agent.max_passes", "200", 'i', 4},
      {"agent.dqn_lr", "0.01", 'd', 1},
      {"agent.minibatch", "64", 'i', 4},
      {"agent.target_sync_interval", "500", 'i', 4},
      {"agent.dqn_steps", "20000", 'i', 4},
      {"agent.discount", "0.99", 'd', 3},
      {"agent.epsilon", "0.05", 'd', 3},
      {"pipeline.epochs", "4", 'i', 4},
      {"pipeline.trials_per_common", "3", 'i', 4},
      {"pipeline.extra_tuples", "5", 'i', 2},
      {"pipeline.trials_per_extra", "1", 'i', 2},
      {"pipeline.episode_periods", "480", 'i', 4},
      {"pipeline.split_ratio", "0.8", 'd', 5},
      {"pipeline.topup_cap", "10", 'i', 2},
      {"pipeline.ci_target", "0.1", 'd', 1},
      {"pipeline.eval_trials", "3", 'i', 4},
      {"pipeline.init_rb_mmtc", "5", 'i', 4},
      {"pipeline.init_rb_urllc", "6", 'i', 4},
      {"pipeline.pool_chunks", "8", 'i', 4},
      {"pipeline.write_kpis", "true", 'b', 0},
      {"traffic.embb.on_s", "2", 'd', 1},
      {"traffic.embb.off_mean_s", "1", 'd', 1},
      {"traffic.embb.rate_mbps", "8", 'd', 2},
      {"traffic.embb.pkt_bytes", "1400", 'd', 1},
      {"traffic.urllc.pkt_per_s", "50", 'd', 2},
      {"traffic.urllc.pkt_bytes", "200", 'd', 1},
      {"traffic.urllc.jitter_ms", "2", 'd', 2},
      {"traffic.urllc.bidirectional", "1", 'd', 3},
      {"traffic.mmtc.burst_interval_s", "10", 'd', 1},
      {"traffic.mmtc.burst_pkts_min", "5", 'd', 2},
      {"traffic.mmtc.burst_pkts_max", "20", 'd', 2},
      {"traffic.mmtc.pkt_bytes_min", "100", 'd', 2},
      {"traffic.mmtc.pkt_bytes_max", "400", 'd', 2},
      {"traffic.mmtc.dl_fraction", "0.5", 'd', 3},
      {"classifier.t_size", "64", 'i', 4},
      {"classifier.lr", "0.001", 'd', 1},
      {"classifier.lr_floor", "1e-05", 'd', 1},
      {"classifier.lr_factor", "0.1", 'd', 5},
      {"classifier.plateau_epochs", "10", 'i', 4},
      {"classifier.plateau_min_delta", "0.0001", 'd', 1},
      {"classifier.early_stop_epochs", "25", 'i', 4},
      {"classifier.max_epochs", "350", 'i', 4},
      {"classifier.minibatch", "128", 'i', 4},
      {"classifier.val_fraction", "0.1", 'd', 5},
      {"classifier.balance", "true", 'b', 0},
      {"classifier.itr_threshold", "0", 'd', 2},
      {"classifier.cap_per_class", "3000", 'i', 2},
      {"classifier.split_ratio", "0.8", 'd', 5},
  };
  return schema;
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Flat dotted-key store over the fixed schema. Section syntax:
//   [pipeline]
//   epochs = 4
class Config {
 public:
  Config() {
    for (const auto& e : detail::config_schema()) values_[e.key] = e.def;
  }

  static Config from_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
      std::string key = detail::trim(line.substr(0, eq));
      std::string value = detail::trim(line.substr(eq + 1));
      if (!section.empty()) key = section + "." + key;
      cfg.set(key, value);
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    validate_value(key, value);
    it->second = value;
  }

  const std::string& get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    return it->second;
  }

  int get_int(const std::string& key) const { return static_cast<int>(parse_ll(key, get_string(key))); }
  uint64_t get_u64(const std::string& key) const { return parse_u64(key, get_string(key)); }
  double get_double(const std::string& key) const { return parse_double(key, get_string(key)); }
  bool get_bool(const std::string& key) const { return parse_bool(key, get_string(key)); }

  // Canonical INI rendering of the fully resolved config; parsing the output
  // reproduces this Config byte for byte.
  std::string render() const {
    std::ostringstream out;
    std::string section;
    for (const auto& e : detail::config_schema()) {
      std::string key = e.key;
      auto dot = key.find('.');
      std::string sec = key.substr(0, dot);
      std::string rest = key.substr(dot + 1);
      if (sec != section) {
        if (!section.empty()) out << "\n";
        out << "[" << sec << "]\n";
        section = sec;
      }
      out << rest << " = " << values_.at(e.key) << "\n";
    }
    return out.str();
  }

  friend bool operator==(const Config& a, const Config& b) { return a.values_ == b.values_; }

 private:
  static long long parse_ll(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      long long r = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return r;
    } catch (...) {
      throw std::invalid_argument("config key '" + key + "': expected integer, got '" + v + "'");
    }
  }
  static uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      unsigned long long r = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return r;
    } catch (...) {
      throw std::invalid_argument("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
  }
  static double parse_double(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      double r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return r;
    } catch (...) {
      throw std::invalid_argument("config key '" + key + "': expected number, got '" + v + "'");
    }
  }
  static bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected boolean, got '" + v + "'");
  }

  static void validate_value(const std::string& key, const std::string& value) {
    for (const auto& e : detail::config_schema()) {
      if (key != e.key) continue;
      double num = 0.0;
      switch (e.type) {
        case 'i': num = static_cast<double>(parse_ll(key, value)); break;
        case 'u': parse_u64(key, value); return;
        case 'd': num = parse_double(key, value); break;
        case 'b': parse_bool(key, value); return;
        case 's': return;
      }
      switch (e.constraint) {
        case 1:
          if (!(num > 0.0)) throw std::invalid_argument("config key '" + key + "': must be > 0");
          break;
        case 2:
          if (!(num >= 0.0)) throw std::invalid_argument("config key '" + key + "': must be >= 0");
          break;
        case 3:
          if (!(num >= 0.0 && num <= 1.0)) throw std::invalid_argument("config key '" + key + "': must be in [0,1]");
          break;
        case 4:
          if (!(num >= 1.0)) throw std::invalid_argument("config key '" + key + "': must be >= 1");
          break;
        case 5:
          if (!(num > 0.0 && num < 1.0)) throw std::invalid_argument("config key '" + key + "': must be in (0,1)");
          break;
        default:
          break;
      }
      return;
    }
    throw std::invalid_argument("unknown config key '" + key + "'");
  }

  std::map<std::string, std::string> values_;
};

inline int resolve_jobs(int jobs_cfg) {
  if (jobs_cfg > 0) return jobs_cfg;
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

inline PipelineConfig build_pipeline_config(const Config& c) {
  PipelineConfig p;
  p.seed = c.get_u64("run.seed");
  p.out_dir = c.get_string("run.out_dir");
  p.jobs = resolve_jobs(c.get_int("run.jobs"));
  p.env.bits_per_prb_subframe = c.get_int("env.bits_per_prb_subframe");
  p.env.period_ms = c.get_int("env.period_ms");
  p.score.alpha = c.get_double("score.alpha");
  p.score.beta = c.get_double("score.beta");
  p.score.gamma_delay = c.get_double("score.gamma_delay");
  p.score.kappa = c.get_double("score.kappa");
  p.score.period_s = p.env.period_ms / 1000.0;
  p.hp.tabular_lr = c.get_double("agent.tabular_lr");
  p.hp.tabular_tol = c.get_double("agent.tabular_tol");
  p.hp.max_passes = c.get_int("agent.max_passes");
  p.hp.dqn_lr = c.get_double("agent.dqn_lr");
  p.hp.minibatch = c.get_int("agent.minibatch");
  p.hp.target_sync_interval = c.get_int("agent.target_sync_interval");
  p.hp.dqn_steps = c.get_int("agent.dqn_steps");
  p.hp.discount = c.get_double("agent.discount");
  p.hp.epsilon = c.get_double("agent.epsilon");
  p.hp.seed = p.seed;
  p.epochs = c.get_int("pipeline.epochs");
  p.trials_per_common = c.get_int("pipeline.trials_per_common");
  p.extra_tuples = c.get_int("pipeline.extra_tuples");
  p.trials_per_extra = c.get_int("pipeline.trials_per_extra");
  p.episode_periods = c.get_int("pipeline.episode_periods");
  p.split_ratio = c.get_double("pipeline.split_ratio");
  p.topup_cap = c.get_int("pipeline.topup_cap");
  p.ci_target = c.get_double("pipeline.ci_target");
  p.eval_trials = c.get_int("pipeline.eval_trials");
  p.init_rbs = RbAllocation{c.get_int("pipeline.init_rb_mmtc"), c.get_int("pipeline.init_rb_urllc")};
  p.pool_chunks = c.get_int("pipeline.pool_chunks");
  p.write_kpis = c.get_bool("pipeline.write_kpis");
  p.collect_epsilon = p.hp.epsilon;
  for (const auto& e : detail::config_schema()) {
    std::string key = e.key;
    if (key.rfind("traffic.", 0) != 0) continue;
    auto second = key.find('.', 8);
    std::string slice = key.substr(8, second - 8);
    std::string param = key.substr(second + 1);
    p.profiles[static_cast<size_t>(slice_from_name(slice))].params[param] = c.get_double(key);
  }
  p.validate();
  return p;
}

inline CnnHyperparams build_cnn_hyperparams(const Config& c) {
  CnnHyperparams hp;
  hp.lr = c.get_double("classifier.lr");
  hp.lr_floor = c.get_double("classifier.lr_floor");
  hp.lr_factor = c.get_double("classifier.lr_factor");
  hp.plateau_epochs = c.get_int("classifier.plateau_epochs");
  hp.plateau_min_delta = c.get_double("classifier.plateau_min_delta");
  hp.early_stop_epochs = c.get_int("classifier.early_stop_epochs");
  hp.max_epochs = c.get_int("classifier.max_epochs");
  hp.minibatch = c.get_int("classifier.minibatch");
  hp.val_fraction = c.get_double("classifier.val_fraction");
  hp.balance = c.get_bool("classifier.balance");
  hp.seed = c.get_u64("run.seed");
  hp.validate();
  return hp;
}

}  // namespace slicebench
