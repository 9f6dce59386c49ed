// Copyright 2026 The ZAPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zapp/config.hpp"
#include "zapp/io.hpp"
#include "zapp/simulator.hpp"

namespace zapp {

struct ExperimentResult {
  std::vector<sim::Scene> scenes;
  std::vector<sim::EpisodeLog> logs;
  sim::MetricsTable metrics;
};

// Scene generation runs first and serially so placement failures surface as
// configuration problems before any episode starts.
inline std::vector<sim::Scene> generate_scenes(const ExperimentConfig& cfg) {
  std::vector<sim::Scene> scenes;
  for (std::uint64_t seed : cfg.seeds()) {
    try {
      scenes.push_back(sim::generate_scene(seed, cfg.hallway));
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("hallway: ") + e.what());
    }
  }
  return scenes;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs) {
  ExperimentResult r;
  r.scenes = generate_scenes(cfg);
  r.logs = sim::parallel_map<sim::EpisodeLog>(r.scenes.size(), jobs, [&](std::size_t i) {
    return sim::run_episode(r.scenes[i], cfg.simulation, cfg.planner, cfg.predictor);
  });
  r.metrics = sim::compute_metrics(r.logs, cfg.name);
  return r;
}

inline void write_outputs(const ExperimentResult& r, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  io::write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  io::write_text(dir / "metrics.csv", io::metrics_csv({r.metrics}));
  io::write_text(dir / "metrics.txt", io::metrics_table({r.metrics}));
  io::write_text(dir / "solve_times.csv", io::solve_times_csv(r.logs));
  std::vector<nlohmann::json> scenes;
  for (const auto& s : r.scenes) scenes.push_back(io::scene_to_json(s));
  io::write_jsonl(dir / "scenes.jsonl", scenes);
  std::vector<nlohmann::json> logs;
  for (const auto& l : r.logs) logs.push_back(io::log_to_json(l, cfg.output.log_stride));
  io::write_jsonl(dir / "episodes.jsonl", logs);
  const fs::path plots = dir / "plots";
  fs::remove_all(plots);
  if (cfg.output.plots > 0) fs::create_directories(plots);
  for (std::size_t i = 0; i < r.logs.size() && static_cast<int>(i) < cfg.output.plots; ++i) {
    io::write_text(plots / ("episode_" + std::to_string(r.logs[i].seed) + ".svg"),
                   io::episode_svg(r.scenes[i], r.logs[i], cfg.simulation.agent_half_width));
  }
}

}  // namespace zapp
