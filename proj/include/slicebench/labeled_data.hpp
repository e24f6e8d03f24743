#pragma once

// Labeled KPI trials for the traffic classifier: single-UE episodes driven by
// the expert policy, one class per stream, written as a manifest directory.

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "slicebench/classifier.hpp"
#include "slicebench/pipeline.hpp"

namespace slicebench {

// One fresh single-UE trial per (class, index); each trial replays its own
// chunk so the train/test split never shares a chunk.
inline void generate_labeled_trials(const PipelineConfig& cfg, const std::string& data_dir,
                                    int trials_per_class) {
  if (trials_per_class <= 0) throw std::invalid_argument("generate_labeled_trials: trials_per_class must be > 0");
  PipelineConfig p = cfg;
  p.write_kpis = true;
  namespace fs = std::filesystem;
  fs::create_directories(data_dir);
  std::ofstream labels(fs::path(data_dir) / "labels.csv", std::ios::binary);
  if (!labels) throw std::runtime_error("generate_labeled_trials: cannot write labels.csv in " + data_dir);
  labels << "file,label\n";
  Policy policy = make_expert_policy();
  const std::array<UserTuple, 4> tuples{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}}};
  for (int c = 0; c < kNumClasses; ++c) {
    auto profiles = p.profiles;
    if (static_cast<TrafficClass>(c) == TrafficClass::ctrl)
      profiles[static_cast<size_t>(Slice::mmtc)].params["burst_interval_s"] = 1e9;  // silence: pure ctrl
    for (int i = 0; i < trials_per_class; ++i) {
      uint64_t seed = derive_seed(p.seed, {0xC9u, static_cast<uint64_t>(c), static_cast<uint64_t>(i)});
      TracePool pool = TracePool::build(profiles, p.episode_seconds(), 1, seed);
      EpisodeResult res = run_episode(policy, tuples[static_cast<size_t>(c)], seed, p, pool, 0, i, 0.0);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d.csv", kClassNames[static_cast<size_t>(c)].c_str(), i);
      write_kpi_csv(res.kpis, (fs::path(data_dir) / name).string());
      labels << name << "," << kClassNames[static_cast<size_t>(c)] << "\n";
    }
  }
}

inline std::vector<Window> load_windows(const std::vector<LabeledFile>& files, int t_size,
                                        size_t cap_per_class, uint64_t seed) {
  WindowReservoir res(cap_per_class, seed);
  for (const auto& lf : files)
    for (auto& w : windows_from_file(lf, t_size)) res.add(std::move(w));
  return res.take();
}

}  // namespace slicebench
