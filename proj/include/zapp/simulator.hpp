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

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "zapp/dynamics.hpp"
#include "zapp/error.hpp"
#include "zapp/planner.hpp"
#include "zapp/predictor.hpp"
#include "zapp/zonotope.hpp"

namespace zapp::sim {

using dynamics::State;
using dynamics::World;

struct HallwayConfig {
  double width = 8.0;
  double x_min = -4.0;
  double x_max = 36.0;
  double wall_thickness = 1.0;
  int num_agents = 10;
  double spawn_x_min = 4.0;
  double spawn_x_max = 32.0;
  double spawn_y_margin = 0.5;       // keep agent centers this far from the walls
  double min_clearance = 2.0;        // pairwise, and to the ego start [m]
  double initial_speed_max = 2.0;
  double desired_speed_min = 0.8;
  double desired_speed_max = 2.0;
  double desired_lateral_max = 0.3;
  double goal_distance = 28.0;
  int max_attempts = 10000;
};

struct Scene {
  std::uint64_t seed = 0;
  std::vector<Zonotope> walls;
  std::vector<State> agents;
  std::vector<Vector2d> desired_velocity;
  State ego_start = State::Zero();
  Vector2d goal = Vector2d::Zero();
};

struct SimConfig {
  double dt = 0.01;              // audit / integration step [s]
  double timeout = 60.0;         // [s]
  int history_length = 8;        // frames kept for the predictor, one per planner step
  double goal_overshoot = 2.0;   // planner target lies this far past the finish line [m]
  double agent_half_width = 0.5;
  dynamics::ForceParams forces;
};

inline Zonotope box_zonotope(const Vector2d& center, const Vector2d& half) {
  return Zonotope(center, MatrixXd(half.asDiagonal()));
}

inline std::vector<Zonotope> hallway_walls(const HallwayConfig& h) {
  const double cx = 0.5 * (h.x_min + h.x_max);
  const Vector2d half(0.5 * (h.x_max - h.x_min), 0.5 * h.wall_thickness);
  const double off = 0.5 * (h.width + h.wall_thickness);
  return {box_zonotope(Vector2d(cx, -off), half), box_zonotope(Vector2d(cx, off), half)};
}

inline std::vector<dynamics::Box> wall_boxes(const std::vector<Zonotope>& walls) {
  std::vector<dynamics::Box> out;
  for (const auto& w : walls) out.push_back(dynamics::interval_hull(w));
  return out;
}

// Rejection-sampled hallway scene; identical seeds give identical scenes.
inline Scene generate_scene(std::uint64_t seed, const HallwayConfig& h = {}) {
  if (h.num_agents < 0) throw InvalidArgument("generate_scene: negative agent count");
  Scene s;
  s.seed = seed;
  s.walls = hallway_walls(h);
  s.ego_start = State::Zero();
  s.goal = s.ego_start.head<2>() + Vector2d(h.goal_distance, 0.0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(h.spawn_x_min, h.spawn_x_max);
  const double y_lim = 0.5 * h.width - h.spawn_y_margin;
  std::uniform_real_distribution<double> uy(-y_lim, y_lim);
  std::uniform_real_distribution<double> speed(h.desired_speed_min, h.desired_speed_max);
  std::uniform_real_distribution<double> lateral(-h.desired_lateral_max, h.desired_lateral_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  int attempts = 0;
  std::vector<Vector2d> placed;
  while (static_cast<int>(placed.size()) < h.num_agents) {
    if (++attempts > h.max_attempts) {
      throw InvalidArgument("generate_scene: agent placement failed after " + std::to_string(h.max_attempts) +
                            " samples");
    }
    const Vector2d p(ux(rng), uy(rng));
    bool ok = (p - s.ego_start.head<2>()).norm() >= h.min_clearance;
    for (const auto& q : placed) ok = ok && (p - q).norm() >= h.min_clearance;
    if (ok) placed.push_back(p);
  }
  for (const auto& p : placed) {
    const double dir = unit(rng) < 0.5 ? -1.0 : 1.0;
    Vector2d v_des(dir * speed(rng), lateral(rng));
    Vector2d v0 = v_des * unit(rng);
    if (v0.norm() > h.initial_speed_max) v0 *= h.initial_speed_max / v0.norm();
    State a;
    a << p, v0;
    s.agents.push_back(a);
    s.desired_velocity.push_back(v_des);
  }
  return s;
}

inline World initial_world(const Scene& s) { return World{s.ego_start, s.agents}; }

// One audit step of the true world. Ego control is held over dt.
inline World step_world(const Scene& scene, const World& w, const Vector2d& ego_control, double dt,
                        const dynamics::ForceParams& forces, const std::vector<dynamics::Box>& boxes) {
  if (!(dt > 0.0) || dt > 0.02) throw InvalidArgument("step_world: dt must lie in (0, 0.02]");
  const dynamics::Environment env{scene.desired_velocity, {}, boxes};
  return dynamics::step(w, ego_control, dt, env, forces);
}

inline World step_world(const Scene& scene, const World& w, const Vector2d& ego_control, double dt,
                        const dynamics::ForceParams& forces = {}) {
  return step_world(scene, w, ego_control, dt, forces, wall_boxes(scene.walls));
}

enum class CrashKind { kAgent, kWall, kNumerical, kPlanner };

inline const char* to_string(CrashKind k) {
  switch (k) {
    case CrashKind::kAgent: return "agent";
    case CrashKind::kWall: return "wall";
    case CrashKind::kNumerical: return "numerical";
    default: return "planner";
  }
}

struct CrashEvent {
  double time = 0.0;
  CrashKind kind = CrashKind::kAgent;
  int index = -1;  // agent or wall index
  Vector2d ego_position = Vector2d::Zero();
};

// Ego point inside an agent square or a wall, by halfspace membership.
inline std::optional<CrashEvent> audit_collision(const World& w, const std::vector<Zonotope>& walls,
                                                 double agent_half_width = 0.5, double time = 0.0) {
  const Vector2d p = w.ego.head<2>();
  for (std::size_t i = 0; i < w.agents.size(); ++i) {
    const Zonotope sq = box_zonotope(w.agents[i].head<2>(), Vector2d::Constant(agent_half_width));
    if (point_outside_margin(to_hrep(sq), p) <= 0.0) {
      return CrashEvent{time, CrashKind::kAgent, static_cast<int>(i), p};
    }
  }
  for (std::size_t j = 0; j < walls.size(); ++j) {
    if (point_outside_margin(to_hrep(walls[j]), p) <= 0.0) {
      return CrashEvent{time, CrashKind::kWall, static_cast<int>(j), p};
    }
  }
  return std::nullopt;
}

enum class Outcome { kNone, kGoal, kCrash, kTimeout };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::kGoal: return "goal";
    case Outcome::kCrash: return "crash";
    case Outcome::kTimeout: return "timeout";
    default: return "none";
  }
}

struct PlanSummary {
  double time = 0.0;
  double solve_time = 0.0;  // wall clock [s]
  bool feasible = false;
  bool fallback = false;
  int outer_iterations = 0;
  double min_slack = 0.0;
  double audit_min_slack = 0.0;
  std::size_t num_records = 0;
  std::vector<double> gamma;
  std::vector<ControlSequence> mode_controls;
  std::vector<std::vector<Vector2d>> planned_positions;
};

struct EpisodeLog {
  std::uint64_t seed = 0;
  std::string variant;
  std::vector<double> times;
  std::vector<World> states;
  std::vector<Vector2d> controls;  // control applied over [times[i], times[i+1])
  std::vector<PlanSummary> plans;
  std::optional<CrashEvent> crash;
  double end_time = 0.0;
  double distance = 0.0;    // path length of the ego [m]
  double x_progress = 0.0;  // displacement toward the goal [m]

  Outcome outcome() const { return outcome_; }
  void set_outcome(Outcome o) {
    if (outcome_ != Outcome::kNone) throw Error("EpisodeLog: outcome already set");
    if (o == Outcome::kNone) throw InvalidArgument("EpisodeLog: cannot clear the outcome");
    outcome_ = o;
  }

  std::vector<double> solve_times() const {
    std::vector<double> out;
    for (const auto& p : plans) out.push_back(p.solve_time);
    return out;
  }

 private:
  Outcome outcome_ = Outcome::kNone;
};

// Feeds the ego a control each audit step.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual Vector2d control(const StateHistory& history, double time, int step, EpisodeLog& log) = 0;
};

// Receding-horizon ZAPP loop: replan every replan_steps planner steps, hold
// each planned control over one planner step.
class MpcController final : public Controller {
 public:
  MpcController(const Scene& scene, const SimConfig& sim, PlannerConfig planner, PredictorConfig predictor)
      : planner_(std::move(planner)),
        predictor_(std::move(predictor), wall_boxes(scene.walls)),
        obstacles_(scene.walls),
        target_(scene.goal + Vector2d(sim.goal_overshoot, 0.0)),
        sub_steps_(static_cast<int>(std::lround(planner_.dt / sim.dt))) {
    if (sub_steps_ < 1 || std::abs(sub_steps_ * sim.dt - planner_.dt) > 1e-9) {
      throw InvalidArgument("MpcController: planner dt must be a multiple of the simulation dt");
    }
  }

  Vector2d control(const StateHistory& history, double time, int step, EpisodeLog& log) override {
    const int period = sub_steps_ * planner_.replan_steps;
    if (step % period == 0) {
      MpcInput in{&history, target_, &obstacles_, previous_ ? &*previous_ : nullptr};
      PlanResult res = mpc_step(predictor_, in, planner_);
      PlanSummary s;
      s.time = time;
      s.solve_time = res.wall_time_s;
      s.feasible = res.feasible;
      s.fallback = res.fallback;
      s.outer_iterations = res.outer_iterations;
      s.min_slack = res.min_slack;
      s.audit_min_slack = res.audit_min_slack;
      s.num_records = res.num_records;
      s.gamma = res.gamma;
      s.mode_controls = res.controls;
      s.planned_positions = res.planned_positions;
      log.plans.push_back(std::move(s));
      previous_ = std::move(res);
    }
    const auto idx = static_cast<std::size_t>((step % period) / sub_steps_);
    return previous_->applied.at(std::min(idx, previous_->applied.size() - 1));
  }

 private:
  PlannerConfig planner_;
  SocialForcePredictor predictor_;
  std::vector<Zonotope> obstacles_;
  Vector2d target_;
  int sub_steps_;
  std::optional<PlanResult> previous_;
};

// Runs one episode until goal, crash or timeout. Controller or numerical
// failures are logged as crashes.
inline EpisodeLog simulate(const Scene& scene, const SimConfig& sim, Controller& controller, double history_dt = 0.1) {
  EpisodeLog log;
  log.seed = scene.seed;
  const auto boxes = wall_boxes(scene.walls);
  const int frame_every = static_cast<int>(std::lround(history_dt / sim.dt));
  const int max_steps = static_cast<int>(std::lround(sim.timeout / sim.dt));
  const double goal_distance = scene.goal.x() - scene.ego_start.x();

  World w = initial_world(scene);
  StateHistory history{history_dt, {w}};
  log.times.push_back(0.0);
  log.states.push_back(w);

  auto finish = [&](Outcome o, double t) {
    log.end_time = t;
    log.x_progress = w.ego.x() - scene.ego_start.x();
    log.set_outcome(o);
  };

  if (auto c = audit_collision(w, scene.walls, sim.agent_half_width, 0.0)) {
    log.crash = c;
    finish(Outcome::kCrash, 0.0);
    return log;
  }

  for (int step = 0; step < max_steps; ++step) {
    const double t = step * sim.dt;
    const double t_next = (step + 1) * sim.dt;
    Vector2d u;
    try {
      u = controller.control(history, t, step, log);
    } catch (const std::exception&) {
      log.crash = CrashEvent{t, CrashKind::kPlanner, -1, w.ego.head<2>()};
      finish(Outcome::kCrash, t);
      return log;
    }
    World next;
    try {
      next = step_world(scene, w, u, sim.dt, sim.forces, boxes);
    } catch (const NumericalError&) {
      log.crash = CrashEvent{t, CrashKind::kNumerical, -1, w.ego.head<2>()};
      finish(Outcome::kCrash, t);
      return log;
    }
    log.distance += (next.ego.head<2>() - w.ego.head<2>()).norm();
    w = std::move(next);
    log.controls.push_back(u);
    log.times.push_back(t_next);
    log.states.push_back(w);

    if ((step + 1) % frame_every == 0) {
      history.frames.push_back(w);
      if (static_cast<int>(history.frames.size()) > sim.history_length) history.frames.erase(history.frames.begin());
    }
    if (auto c = audit_collision(w, scene.walls, sim.agent_half_width, t_next)) {
      log.crash = c;
      finish(Outcome::kCrash, t_next);
      return log;
    }
    if (w.ego.x() - scene.ego_start.x() >= goal_distance) {
      finish(Outcome::kGoal, t_next);
      return log;
    }
  }
  finish(Outcome::kTimeout, max_steps * sim.dt);
  return log;
}

inline EpisodeLog run_episode(const Scene& scene, const SimConfig& sim, const PlannerConfig& planner,
                              const PredictorConfig& predictor) {
  MpcController controller(scene, sim, planner, predictor);
  EpisodeLog log = simulate(scene, sim, controller, planner.dt);
  log.variant = std::string(to_string(planner.variant));
  return log;
}

// Ego drawn toward the goal by an attractive potential and pushed off
// agents and walls; used to roll out scenes for surrogate calibration data.
class PotentialFieldController final : public Controller {
 public:
  PotentialFieldController(const Scene& scene, double attraction = 1.0, double repulsion = 1.0, double damping = 1.5,
                           double a_max = 3.0)
      : goal_(scene.goal), walls_(wall_boxes(scene.walls)), ka_(attraction), kr_(repulsion), kd_(damping),
        a_max_(a_max) {}

  Vector2d control(const StateHistory& history, double, int, EpisodeLog&) override {
    const World& w = history.current();
    const Vector2d p = w.ego.head<2>();
    Vector2d u = ka_ * (goal_ - p).normalized() - kd_ * w.ego.tail<2>() / 3.0;
    for (const auto& a : w.agents) {
      const Vector2d r = p - a.head<2>();
      const double d = std::max(r.norm(), 0.1);
      u += kr_ * r / (d * d * d);
    }
    for (const auto& b : walls_) {
      const Vector2d q = p.cwiseMax(b.lo).cwiseMin(b.hi);
      const Vector2d r = p - q;
      const double d = std::max(r.norm(), 0.1);
      u += kr_ * r / (d * d * d);
    }
    return u.cwiseMax(-a_max_).cwiseMin(a_max_);
  }

 private:
  Vector2d goal_;
  std::vector<dynamics::Box> walls_;
  double ka_, kr_, kd_, a_max_;
};

struct MetricsTable {
  std::string variant;
  int episodes = 0;
  int goals = 0;
  int crashes = 0;
  int timeouts = 0;
  double goals_pct = 0.0;
  double crashes_pct = 0.0;
  double avg_speed_mean = 0.0;  // crash-free episodes only [m/s]
  double avg_speed_std = 0.0;
  double solve_time_mean = 0.0;  // over every MPC solve [s]
  double solve_time_std = 0.0;
};

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

inline MetricsTable compute_metrics(const std::vector<EpisodeLog>& logs, const std::string& variant = "") {
  if (logs.empty()) throw InvalidArgument("compute_metrics: no logs");
  MetricsTable m;
  m.variant = variant.empty() ? logs.front().variant : variant;
  m.episodes = static_cast<int>(logs.size());
  std::vector<double> speeds;
  std::vector<double> solves;
  for (const auto& log : logs) {
    switch (log.outcome()) {
      case Outcome::kGoal: ++m.goals; break;
      case Outcome::kCrash: ++m.crashes; break;
      case Outcome::kTimeout: ++m.timeouts; break;
      default: throw InvalidArgument("compute_metrics: episode without outcome");
    }
    if (log.outcome() != Outcome::kCrash && log.end_time > 0.0) speeds.push_back(log.x_progress / log.end_time);
    for (const auto& p : log.plans) solves.push_back(p.solve_time);
  }
  m.goals_pct = 100.0 * m.goals / m.episodes;
  m.crashes_pct = 100.0 * m.crashes / m.episodes;
  std::tie(m.avg_speed_mean, m.avg_speed_std) = mean_std(speeds);
  std::tie(m.solve_time_mean, m.solve_time_std) = mean_std(solves);
  return m;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, int jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> slots(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace zapp::sim
