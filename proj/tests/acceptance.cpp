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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances are fixed here on purpose.

#include <chrono>
#include <cstdio>
#include <string>
#include <thread>

#include "zapp/config.hpp"
#include "zapp/experiment.hpp"
#include "zapp/io.hpp"
#include "zapp/selftest.hpp"

namespace {

using namespace zapp;
using Clock = std::chrono::steady_clock;

constexpr double kCollisionBudgetS = 30.0;
constexpr double kConstraintGradTol = 1e-4;
constexpr double kCostGradTol = 1e-6;
constexpr double kCoverageRate = 0.99;
constexpr double kCrashGapPp = 10.0;
constexpr double kSpeedTolerance = 0.15;
constexpr double kBenchmarkBudgetS = 30.0 * 60.0;
constexpr int kMaxOuter = 10;
constexpr double kAuditTol = 1e-9;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

}  // namespace

int main() {
  const int jobs = std::max(1u, std::thread::hardware_concurrency());

  {
    const auto t0 = Clock::now();
    const auto r = checks::collision_oracle(101, 100);
    const double s = seconds_since(t0);
    report(1, r.disagreements == 0 && s < kCollisionBudgetS,
           fmt("%d disagreements over %d pairs (%d colliding), %.1f s", r.disagreements, r.pairs, r.colliding, s));
  }
  {
    const auto r = checks::hrep_check(102, 100, 1000);
    report(2, r.interior_failures == 0 && r.exterior_failures == 0,
           fmt("%d/%d interior and %d/%d exterior failures, worst interior residual %.2e", r.interior_failures,
               r.interior_samples, r.exterior_failures, r.exterior_points, r.worst_interior));
  }
  {
    const auto r = checks::gradient_check_planning(103, 50, 20);
    report(3, r.problems == 50 && r.records_checked > 0 && r.worst_constraint < kConstraintGradTol &&
                  r.worst_cost < kCostGradTol,
           fmt("constraint rel. error %.2e over %d records (%d tie-skipped), cost rel. error %.2e over %d problems",
               r.worst_constraint, r.records_checked, r.records_skipped, r.worst_cost, r.problems));
  }
  {
    const auto r = checks::coverage_check(104, 20, 10000);
    report(4, r.instances == 20 && r.worst_rate >= kCoverageRate,
           fmt("coverage worst %.4f, mean %.4f over %d instances x %d samples", r.worst_rate, r.mean_rate,
               r.instances, r.samples_per_instance));
  }

  // Paired benchmark; its episodes also feed criteria 6 and 7.
  const auto t_bench = Clock::now();
  ExperimentConfig zcfg;
  ExperimentConfig bcfg;
  try {
    zcfg = load_config(ZAPP_CONFIG_DIR "/zapp.json");
    bcfg = load_config(ZAPP_CONFIG_DIR "/discrete-baseline.json");
  } catch (const std::exception& e) {
    std::printf("cannot load benchmark configs: %s\n", e.what());
    return 2;
  }
  const ExperimentResult zr = run_experiment(zcfg, jobs);
  const ExperimentResult br = run_experiment(bcfg, jobs);
  const double bench_s = seconds_since(t_bench);
  {
    const auto& z = zr.metrics;
    const auto& b = br.metrics;
    const bool paired = zcfg.seeds() == bcfg.seeds() && zcfg.seeds().size() == 30;
    const double gap = b.crashes_pct - z.crashes_pct;
    const bool speed_ok = b.avg_speed_mean > 0.0 &&
                          std::abs(z.avg_speed_mean - b.avg_speed_mean) <= kSpeedTolerance * b.avg_speed_mean;
    report(5, paired && z.crashes_pct < b.crashes_pct && gap >= kCrashGapPp && speed_ok && bench_s < kBenchmarkBudgetS,
           fmt("crashes %.1f%% vs %.1f%% (gap %.1f pp, need >= %.0f), AS %.2f vs %.2f m/s, %.0f s", z.crashes_pct,
               b.crashes_pct, gap, kCrashGapPp, z.avg_speed_mean, b.avg_speed_mean, bench_s));
  }

  {
    int plans = 0;
    int split = 0;
    int replay_diff = 0;
    for (const auto* pair : {&zr, &br}) {
      const ExperimentConfig& cfg = pair == &zr ? zcfg : bcfg;
      const int kc = cfg.planner.consensus_steps;
      for (const auto& log : pair->logs)
        for (const auto& p : log.plans) {
          ++plans;
          for (const auto& mode : p.mode_controls)
            for (int k = 0; k <= kc; ++k)
              if (mode.at(static_cast<std::size_t>(k)) != p.mode_controls.front().at(static_cast<std::size_t>(k))) {
                ++split;
              }
        }
      const auto again = sim::parallel_map<std::string>(pair->scenes.size(), jobs, [&](std::size_t i) {
        return io::log_to_json(sim::run_episode(pair->scenes[i], cfg.simulation, cfg.planner, cfg.predictor)).dump();
      });
      for (std::size_t i = 0; i < again.size(); ++i)
        if (again[i] != io::log_to_json(pair->logs[i]).dump()) ++replay_diff;
    }
    report(6, split == 0 && replay_diff == 0,
           fmt("%d consensus mismatches over %d plans, %d of %zu episodes differ on replay (wall-clock fields excluded)",
               split, plans, replay_diff, zr.logs.size() + br.logs.size()));
  }

  {
    int plans = 0;
    int over = 0;
    int audit_fail = 0;
    int feasible = 0;
    double worst_audit = std::numeric_limits<double>::infinity();
    for (const auto* r : {&zr, &br})
      for (const auto& log : r->logs)
        for (const auto& p : log.plans) {
          ++plans;
          if (p.outer_iterations > kMaxOuter) ++over;
          if (!p.feasible) continue;
          ++feasible;
          worst_audit = std::min(worst_audit, p.audit_min_slack);
          if (p.audit_min_slack < -kAuditTol) ++audit_fail;
        }
    report(7, over == 0 && audit_fail == 0,
           fmt("%d of %d solves above %d outer iterations, %d of %d feasible plans fail the audit (worst slack %.2e)",
               over, plans, kMaxOuter, audit_fail, feasible, worst_audit));
  }

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
