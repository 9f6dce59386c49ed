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

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "zapp/experiment.hpp"
#include "zapp/selftest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInternal = 2;
constexpr int kExitSelftest = 3;

struct Common {
  std::string out = "zapp_out";
  int jobs = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> seed;
};

zapp::ExperimentConfig load(const std::string& path, const Common& common) {
  zapp::ExperimentConfig cfg = zapp::load_config(path);
  if (common.seed) cfg.seed_base = *common.seed;
  return cfg;
}

int cmd_run(const std::string& path, const Common& common) {
  zapp::ExperimentConfig cfg;
  try {
    cfg = load(path, common);
    zapp::generate_scenes(cfg);
  } catch (const zapp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const auto result = zapp::run_experiment(cfg, common.jobs);
  zapp::write_outputs(result, cfg, common.out);
  std::cout << zapp::io::metrics_table({result.metrics});
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& paths, const Common& common) {
  if (paths.size() < 2) {
    std::cerr << "compare needs at least two configs\n";
    return kExitConfig;
  }
  std::vector<zapp::ExperimentConfig> cfgs;
  try {
    for (const auto& p : paths) cfgs.push_back(load(p, common));
    for (const auto& c : cfgs) zapp::generate_scenes(c);
  } catch (const zapp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  for (std::size_t i = 1; i < cfgs.size(); ++i) {
    if (cfgs[i].seeds() != cfgs[0].seeds()) {
      std::cerr << "config error: " << paths[i] << " uses a different seed set than " << paths[0] << "\n";
      return kExitConfig;
    }
  }
  // identical configurations share one run, so their rows match exactly
  std::map<std::string, zapp::ExperimentResult> cache;
  std::vector<zapp::sim::MetricsTable> rows;
  const std::filesystem::path out(common.out);
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const std::string key = zapp::to_json(cfgs[i]).dump();
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, zapp::run_experiment(cfgs[i], common.jobs)).first;
    zapp::write_outputs(it->second, cfgs[i], out / (std::to_string(i) + "-" + cfgs[i].name));
    rows.push_back(it->second.metrics);
  }
  zapp::io::write_text(out / "compare.csv", zapp::io::metrics_csv(rows));
  zapp::io::write_text(out / "compare.txt", zapp::io::metrics_table(rows));
  std::cout << zapp::io::metrics_table(rows);
  return kExitOk;
}

int cmd_selftest(bool inject_fault) {
  bool ok = true;
  for (const auto& r : zapp::checks::run_selftest(inject_fault)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " (" << r.seconds << " s)\n";
    ok = ok && r.passed;
  }
  std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? kExitOk : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zonotope contingency MPC hallway benchmark"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--out", common.out, "output directory");
  app.add_option("--jobs", common.jobs, "parallel episodes")->check(CLI::PositiveNumber);
  app.add_option("--seed", common.seed, "override the scene seed base");

  std::string run_config;
  auto* run = app.add_subcommand("run", "run every episode of one configuration");
  run->add_option("config", run_config, "experiment config (JSON)")->required();

  std::vector<std::string> compare_configs;
  auto* compare = app.add_subcommand("compare", "paired-seed comparison of several configurations");
  compare->add_option("configs", compare_configs, "experiment configs (JSON)")->required();

  bool inject = false;
  auto* selftest = app.add_subcommand("selftest", "run the oracle suites");
  selftest->add_flag("--inject-gradient-fault", inject, "perturb the analytic gradient (the suite must fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_config, common);
    if (*compare) return cmd_compare(compare_configs, common);
    if (*selftest) return cmd_selftest(inject);
  } catch (const zapp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
