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

#include <cstdint>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "zapp/error.hpp"
#include "zapp/planner.hpp"
#include "zapp/predictor.hpp"
#include "zapp/simulator.hpp"

namespace zapp {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct OutputOptions {
  int plots = 3;        // SVG plots for the first n episodes
  int log_stride = 10;  // write every n-th audit state to episodes.jsonl
};

struct ExperimentConfig {
  std::string name;  // defaults to the variant name
  int scenes = 30;
  std::uint64_t seed_base = 1000;
  PlannerConfig planner;
  PredictorConfig predictor;
  sim::HallwayConfig hallway;
  sim::SimConfig simulation;
  OutputOptions output;

  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> out;
    for (int i = 0; i < scenes; ++i) out.push_back(seed_base + static_cast<std::uint64_t>(i));
    return out;
  }
};

namespace detail {

using nlohmann::json;

// Reads the keys of one JSON object and rejects the ones nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out, const std::function<bool(const T&)>& valid = nullptr, const char* rule = "") {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    T value;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (!it->is_number_unsigned() && it->template get<std::int64_t>() < 0) throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else {
        if (!it->is_string()) throw ConfigError("");
      }
      value = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": wrong type");
    }
    if (valid && !valid(value)) throw ConfigError(where(key) + ": " + rule);
    out = value;
  }

  void get_positive(const char* key, double& out) {
    get<double>(key, out, [](const double& v) { return std::isfinite(v) && v > 0.0; }, "must be > 0");
  }
  void get_nonnegative(const char* key, double& out) {
    get<double>(key, out, [](const double& v) { return std::isfinite(v) && v >= 0.0; }, "must be >= 0");
  }
  void get_at_least(const char* key, int& out, int lo) {
    get<int>(key, out, [lo](const int& v) { return v >= lo; }, (std::string("must be >= ") + std::to_string(lo)).c_str());
  }

  // Runs fn on the nested object when present.
  void child(const char* key, const std::function<void(ObjectReader&)>& fn) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    ObjectReader r(*it, where(key));
    fn(r);
    r.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
    }
  }

 private:
  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_forces(ObjectReader& r, dynamics::ForceParams& f) {
  r.get_nonnegative("agent_gain", f.agent_gain);
  r.get_nonnegative("ego_gain", f.ego_gain);
  r.get_nonnegative("obstacle_gain", f.obstacle_gain);
  r.get_positive("relax_time", f.relax_time);
  r.get_positive("v_max", f.v_max);
  r.get_positive("a_max", f.a_max);
  r.get_positive("obstacle_min_distance", f.obstacle_min_distance);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::ObjectReader root(j, "");
  root.get<std::string>("name", c.name, [](const std::string& s) { return !s.empty(); }, "must not be empty");
  std::string variant = std::string(to_string(c.planner.variant));
  root.get<std::string>("variant", variant, [](const std::string& s) { return parse_variant(s).has_value(); },
                        "must be one of zapp, zapp-no-interaction, discrete-baseline");
  c.planner.variant = *parse_variant(variant);
  root.get_at_least("scenes", c.scenes, 1);
  root.get<std::uint64_t>("seed_base", c.seed_base);

  dynamics::ForceParams forces;
  root.child("forces", [&](detail::ObjectReader& r) { detail::read_forces(r, forces); });
  c.predictor.forces = forces;
  c.simulation.forces = forces;

  root.child("planner", [&](detail::ObjectReader& r) {
    PlannerConfig& p = c.planner;
    r.get_positive("dt", p.dt);
    r.get_at_least("horizon", p.horizon, 2);
    r.get_at_least("consensus_steps", p.consensus_steps, 0);
    r.get_at_least("replan_steps", p.replan_steps, 1);
    r.get_at_least("mode_count", p.mode_count, 1);
    r.get_at_least("constrained_agents", p.constrained_agents, 0);
    r.get_positive("u_max", p.u_max);
    r.get_positive("du_max", p.du_max);
    r.get_positive("v_max", p.v_max);
    r.get_nonnegative("weight_terminal", p.weight_terminal);
    r.get_nonnegative("weight_effort", p.weight_effort);
    r.get_positive("alpha", p.alpha);
    r.get_nonnegative("safety_margin", p.safety_margin);
    r.get_positive("nominal_speed", p.nominal_speed);
    r.get_positive("nominal_position_gain", p.nominal_position_gain);
    r.get_positive("nominal_velocity_gain", p.nominal_velocity_gain);
    r.get_positive("cull_distance", p.cull_distance);
    r.get<bool>("smooth_max", p.smooth_max);
    r.get_positive("smooth_temperature", p.smooth_temperature);
    r.child("solver", [&](detail::ObjectReader& s) {
      s.get_at_least("max_outer_iterations", p.solver.max_outer_iterations, 1);
      s.get_at_least("max_inner_iterations", p.solver.max_inner_iterations, 1);
      s.get_positive("t0", p.solver.t0);
      s.get_positive("t0_warm", p.solver.t0_warm);
      s.get_positive("gap_tolerance", p.solver.gap_tolerance);
      s.get<double>("t_factor", p.solver.t_factor, [](const double& v) { return v > 1.0; }, "must be > 1");
    });
  });

  root.child("predictor", [&](detail::ObjectReader& r) {
    PredictorConfig& p = c.predictor;
    r.get_nonnegative("agent_noise", p.agent_noise);
    r.get_nonnegative("ego_noise", p.ego_noise);
    r.get_nonnegative("agent_position_std", p.agent_position_std);
    r.get_nonnegative("interaction_radius", p.interaction_radius);
    r.get_at_least("max_interacting", p.max_interacting, 0);
    r.get_nonnegative("lateral_bias", p.lateral_bias);
    r.get_positive("gamma_temperature", p.gamma_temperature);
  });

  root.child("hallway", [&](detail::ObjectReader& r) {
    sim::HallwayConfig& h = c.hallway;
    r.get_positive("width", h.width);
    r.get<double>("x_min", h.x_min);
    r.get<double>("x_max", h.x_max);
    r.get_positive("wall_thickness", h.wall_thickness);
    r.get_at_least("num_agents", h.num_agents, 0);
    r.get<double>("spawn_x_min", h.spawn_x_min);
    r.get<double>("spawn_x_max", h.spawn_x_max);
    r.get_nonnegative("spawn_y_margin", h.spawn_y_margin);
    r.get_nonnegative("min_clearance", h.min_clearance);
    r.get_nonnegative("initial_speed_max", h.initial_speed_max);
    r.get_nonnegative("desired_speed_min", h.desired_speed_min);
    r.get_nonnegative("desired_speed_max", h.desired_speed_max);
    r.get_nonnegative("desired_lateral_max", h.desired_lateral_max);
    r.get_positive("goal_distance", h.goal_distance);
    r.get_at_least("max_attempts", h.max_attempts, 1);
  });

  root.child("simulation", [&](detail::ObjectReader& r) {
    sim::SimConfig& s = c.simulation;
    r.get<double>("dt", s.dt, [](const double& v) { return v > 0.0 && v <= 0.02; }, "must lie in (0, 0.02]");
    r.get_positive("timeout", s.timeout);
    r.get_at_least("history_length", s.history_length, 1);
    r.get_nonnegative("goal_overshoot", s.goal_overshoot);
    r.get_positive("agent_half_width", s.agent_half_width);
  });

  root.child("output", [&](detail::ObjectReader& r) {
    r.get_at_least("plots", c.output.plots, 0);
    r.get_at_least("log_stride", c.output.log_stride, 1);
  });
  root.finish();

  // cross-field rules
  const auto& p = c.planner;
  const auto& h = c.hallway;
  if (p.consensus_steps >= p.horizon) throw ConfigError("planner.consensus_steps must be < planner.horizon");
  if (p.replan_steps > p.consensus_steps + 1) {
    throw ConfigError("planner.replan_steps must not exceed planner.consensus_steps + 1");
  }
  const double ratio = p.dt / c.simulation.dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) throw ConfigError("planner.dt must be a multiple of simulation.dt");
  if (h.x_max <= h.x_min) throw ConfigError("hallway.x_max must exceed hallway.x_min");
  if (h.spawn_x_max <= h.spawn_x_min) throw ConfigError("hallway.spawn_x_max must exceed hallway.spawn_x_min");
  if (h.desired_speed_max < h.desired_speed_min) {
    throw ConfigError("hallway.desired_speed_max must be >= hallway.desired_speed_min");
  }
  if (2.0 * h.spawn_y_margin >= h.width) throw ConfigError("hallway.spawn_y_margin leaves no room to spawn");
  if (h.goal_distance >= h.x_max || h.x_min >= 0.0) {
    throw ConfigError("hallway must span the ego start (x = 0) and the goal");
  }
  if (c.name.empty()) c.name = std::string(to_string(c.planner.variant));
  if (c.name.find_first_of(",\n\"/\\") != std::string::npos) throw ConfigError("name must not contain , \" / \\ or newlines");
  c.planner.agent_half_width = c.simulation.agent_half_width;
  c.predictor.dt = c.planner.dt;
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Canonical form with every field spelled out; equal configs serialize equally.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& p = c.planner;
  const auto& pr = c.predictor;
  const auto& h = c.hallway;
  const auto& s = c.simulation;
  const auto& f = s.forces;
  return {
      {"name", c.name},
      {"variant", std::string(to_string(p.variant))},
      {"scenes", c.scenes},
      {"seed_base", c.seed_base},
      {"forces",
       {{"agent_gain", f.agent_gain}, {"ego_gain", f.ego_gain}, {"obstacle_gain", f.obstacle_gain},
        {"relax_time", f.relax_time}, {"v_max", f.v_max}, {"a_max", f.a_max},
        {"obstacle_min_distance", f.obstacle_min_distance}}},
      {"planner",
       {{"dt", p.dt}, {"horizon", p.horizon}, {"consensus_steps", p.consensus_steps},
        {"replan_steps", p.replan_steps}, {"mode_count", p.mode_count}, {"constrained_agents", p.constrained_agents},
        {"u_max", p.u_max}, {"du_max", p.du_max}, {"v_max", p.v_max}, {"weight_terminal", p.weight_terminal},
        {"weight_effort", p.weight_effort}, {"alpha", p.alpha}, {"safety_margin", p.safety_margin},
        {"nominal_speed", p.nominal_speed}, {"nominal_position_gain", p.nominal_position_gain},
        {"nominal_velocity_gain", p.nominal_velocity_gain}, {"cull_distance", p.cull_distance},
        {"smooth_max", p.smooth_max}, {"smooth_temperature", p.smooth_temperature},
        {"solver",
         {{"max_outer_iterations", p.solver.max_outer_iterations},
          {"max_inner_iterations", p.solver.max_inner_iterations}, {"t0", p.solver.t0},
          {"t0_warm", p.solver.t0_warm}, {"t_factor", p.solver.t_factor},
          {"gap_tolerance", p.solver.gap_tolerance}}}}},
      {"predictor",
       {{"agent_noise", pr.agent_noise}, {"ego_noise", pr.ego_noise}, {"agent_position_std", pr.agent_position_std},
        {"interaction_radius", pr.interaction_radius},
        {"max_interacting", pr.max_interacting}, {"lateral_bias", pr.lateral_bias},
        {"gamma_temperature", pr.gamma_temperature}}},
      {"hallway",
       {{"width", h.width}, {"x_min", h.x_min}, {"x_max", h.x_max}, {"wall_thickness", h.wall_thickness},
        {"num_agents", h.num_agents}, {"spawn_x_min", h.spawn_x_min}, {"spawn_x_max", h.spawn_x_max},
        {"spawn_y_margin", h.spawn_y_margin}, {"min_clearance", h.min_clearance},
        {"initial_speed_max", h.initial_speed_max}, {"desired_speed_min", h.desired_speed_min},
        {"desired_speed_max", h.desired_speed_max}, {"desired_lateral_max", h.desired_lateral_max},
        {"goal_distance", h.goal_distance}, {"max_attempts", h.max_attempts}}},
      {"simulation",
       {{"dt", s.dt}, {"timeout", s.timeout}, {"history_length", s.history_length},
        {"goal_overshoot", s.goal_overshoot}, {"agent_half_width", s.agent_half_width}}},
      {"output", {{"plots", c.output.plots}, {"log_stride", c.output.log_stride}}},
  };
}

}  // namespace zapp
