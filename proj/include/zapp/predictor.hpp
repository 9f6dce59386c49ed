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
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "zapp/dynamics.hpp"
#include "zapp/error.hpp"

namespace zapp {

using ControlSequence = std::vector<Vector2d>;

// Uniformly sampled world snapshots, oldest first; the last frame is "now".
struct StateHistory {
  double dt = 0.1;
  std::vector<dynamics::World> frames;

  const dynamics::World& current() const { return frames.back(); }
};

// One joint mode of the multi-agent system. Slot 0 is the ego, slots
// 1..m the other agents, in the order of the history frames.
struct ModePrediction {
  int mode_id = 0;
  double gamma = 1.0;
  std::vector<std::pair<int, int>> passing;  // (agent slot, +1 left / -1 right)

  std::vector<std::vector<Eigen::Vector4d>> means;        // [slot][k], k = 0..kf
  std::vector<std::vector<Eigen::Matrix4d>> covariances;  // [slot][k]
  std::vector<std::vector<MatrixXd>> jacobians;           // [slot][k]: 4 x 2kf, d mean / d U_f

  int horizon() const { return means.empty() ? 0 : static_cast<int>(means.front().size()) - 1; }
  int slots() const { return static_cast<int>(means.size()); }
};

// Source of (g_mu, g_Sigma, d g_mu / d U_f). Implementations must be pure
// functions of their arguments.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<ModePrediction> predict(const StateHistory& history,
                                              const ControlSequence& nominal_controls,
                                              int horizon, int mode_count) const = 0;
};

struct PredictorConfig {
  double dt = 0.1;
  dynamics::ForceParams forces;
  double agent_noise = 0.02;        // velocity variance rate [m^2/s^3]; Q = diag(0,0,q,q) dt
  double ego_noise = 0.02;
  // Initial agent position uncertainty [m]. Position-only, so F Sigma(0) F^T
  // equals Sigma(0) and the covariance track stays monotone.
  double agent_position_std = 0.05;
  double interaction_radius = 3.0;  // closest approach that makes an agent "nearby" [m]
  int max_interacting = 3;
  double lateral_bias = 0.6;        // passing-side acceleration seed [m/s^2]
  double gamma_temperature = 0.25;
};

struct ModeSeed {
  std::vector<std::pair<int, int>> passing;
  std::vector<Vector2d> bias;  // per non-ego agent
  double gamma = 1.0;
};

// Social-force surrogate predictor. Mirrors the simulator's force law; agent
// desired velocities are recovered by inverting the relaxation term.
class SocialForcePredictor final : public Predictor {
 public:
  SocialForcePredictor(PredictorConfig config, std::vector<dynamics::Box> obstacles)
      : config_(std::move(config)), obstacles_(std::move(obstacles)) {}

  const PredictorConfig& config() const { return config_; }

  struct Rollout {
    std::vector<dynamics::World> states;  // k = 0..kf
    std::vector<MatrixXd> jacobians;      // d stacked state(k) / d U_f, (4 slots) x 2kf
  };

  // Inverts the relaxation term over the last two frames:
  // dv/dt = (v_des - v) / tau + F  =>  v_des = mean(v) + tau (dv/dt - mean(F)).
  // A single frame gives the current velocity.
  std::vector<Vector2d> desired_velocities(const StateHistory& history) const {
    const std::size_t m = history.current().agents.size();
    for (const auto& frame : history.frames) {
      if (frame.agents.size() != m) {
        throw InvalidArgument("predict: agent count changes across history frames");
      }
    }
    std::vector<Vector2d> out(m, Vector2d::Zero());
    const dynamics::World& now = history.current();
    if (history.frames.size() < 2) {
      for (std::size_t i = 0; i < m; ++i) out[i] = now.agents[i].tail<2>();
      return out;
    }
    const dynamics::World& prev = history.frames[history.frames.size() - 2];
    const std::vector<Vector2d> zero(m, Vector2d::Zero());
    const dynamics::Environment env{zero, {}, obstacles_};
    const double tau = config_.forces.relax_time;
    for (std::size_t i = 0; i < m; ++i) {
      const Vector2d v0 = prev.agents[i].tail<2>();
      const Vector2d v1 = now.agents[i].tail<2>();
      // agent_acceleration with zero desired velocity returns F - v / tau
      const Vector2d f0 = dynamics::agent_acceleration(prev, i, env, config_.forces, nullptr) + v0 / tau;
      const Vector2d f1 = dynamics::agent_acceleration(now, i, env, config_.forces, nullptr) + v1 / tau;
      Vector2d est = 0.5 * (v0 + v1) + tau * ((v1 - v0) / history.dt - 0.5 * (f0 + f1));
      const double cap = config_.forces.v_max;
      if (!est.allFinite()) est = v1;
      out[i] = est.cwiseMax(-cap).cwiseMin(cap);
    }
    return out;
  }

  Rollout rollout(const dynamics::World& start, const ControlSequence& controls, int horizon,
                  std::span<const Vector2d> desired, std::span<const Vector2d> bias,
                  bool with_jacobians) const {
    if (static_cast<int>(controls.size()) < horizon) {
      throw InvalidArgument("predict: control sequence shorter than horizon");
    }
    const dynamics::Environment env{desired, bias, obstacles_};
    Rollout out;
    out.states.reserve(static_cast<std::size_t>(horizon) + 1);
    out.states.push_back(start);
    const Index n = start.size();
    const Index nu = 2 * horizon;
    if (with_jacobians) out.jacobians.push_back(MatrixXd::Zero(n, nu));
    dynamics::StepJacobians step_jac;
    for (int k = 0; k < horizon; ++k) {
      out.states.push_back(dynamics::step(out.states.back(), controls[static_cast<std::size_t>(k)],
                                          config_.dt, env, config_.forces,
                                          with_jacobians ? &step_jac : nullptr));
      if (with_jacobians) {
        // Columns for controls at k' > k stay exactly zero: they are only
        // injected at their own step.
        MatrixXd next = MatrixXd::Zero(n, nu);
        if (k > 0) next.leftCols(2 * k) = step_jac.state * out.jacobians.back().leftCols(2 * k);
        next.middleCols(2 * k, 2) = step_jac.control;
        out.jacobians.push_back(std::move(next));
      }
    }
    return out;
  }

  // Candidate joint modes: one passing-side seed (left/right) for each of the
  // closest agents whose unbiased rollout comes within the interaction
  // radius of the ego, all sign combinations, gamma = softmax(-cost / T).
  std::vector<ModeSeed> mode_enumerate(const StateHistory& history, const ControlSequence& controls,
                                       int horizon) const {
    validate(history, horizon);
    const dynamics::World& now = history.current();
    const auto desired = desired_velocities(history);
    const std::size_t m = now.agents.size();

    const Rollout plain = rollout(now, controls, horizon, desired, {}, false);
    std::vector<std::pair<double, std::size_t>> nearby;
    for (std::size_t i = 0; i < m; ++i) {
      double closest = std::numeric_limits<double>::infinity();
      for (const auto& s : plain.states) {
        closest = std::min(closest, (s.agents[i].head<2>() - s.ego.head<2>()).norm());
      }
      if (closest < config_.interaction_radius) {
        nearby.emplace_back((now.agents[i].head<2>() - now.ego.head<2>()).norm(), i);
      }
    }
    std::stable_sort(nearby.begin(), nearby.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (static_cast<int>(nearby.size()) > config_.max_interacting) {
      nearby.resize(static_cast<std::size_t>(config_.max_interacting));
    }

    const std::size_t combos = std::size_t{1} << nearby.size();
    std::vector<ModeSeed> seeds(combos);
    std::vector<double> cost(combos, 0.0);
    for (std::size_t mask = 0; mask < combos; ++mask) {
      ModeSeed& seed = seeds[mask];
      seed.bias.assign(m, Vector2d::Zero());
      for (std::size_t b = 0; b < nearby.size(); ++b) {
        const std::size_t i = nearby[b].second;
        const int side = (mask >> b) & 1U ? 1 : -1;
        const Vector2d rel = now.agents[i].head<2>() - now.ego.head<2>();
        const Vector2d lateral = rel.norm() > 1e-9 ? Vector2d(-rel.y(), rel.x()) / rel.norm()
                                                   : Vector2d(0.0, 1.0);
        seed.bias[i] = side * config_.lateral_bias * lateral;
        seed.passing.emplace_back(static_cast<int>(i) + 1, side);
      }
      if (nearby.empty()) break;
      const Rollout r = rollout(now, controls, horizon, desired, seed.bias, false);
      for (std::size_t k = 1; k < r.states.size(); ++k) {
        for (const auto& [dist0, i] : nearby) {
          const double d = (r.states[k].agents[i].head<2>() - r.states[k].ego.head<2>()).norm();
          cost[mask] += config_.dt / (d * d + 0.25);
        }
      }
    }
    const double best = *std::min_element(cost.begin(), cost.end());
    double total = 0.0;
    for (std::size_t c = 0; c < combos; ++c) {
      seeds[c].gamma = std::exp(-(cost[c] - best) / config_.gamma_temperature);
      total += seeds[c].gamma;
    }
    for (auto& s : seeds) s.gamma /= total;
    return seeds;
  }

  std::vector<ModePrediction> predict(const StateHistory& history, const ControlSequence& nominal_controls,
                                      int horizon, int mode_count) const override {
    validate(history, horizon);
    if (mode_count < 1) throw InvalidArgument("predict: mode_count must be >= 1");
    std::vector<ModeSeed> seeds = mode_enumerate(history, nominal_controls, horizon);
    std::vector<std::size_t> order(seeds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return seeds[a].gamma > seeds[b].gamma; });
    if (static_cast<int>(order.size()) > mode_count) order.resize(static_cast<std::size_t>(mode_count));

    const dynamics::World& now = history.current();
    const auto desired = desired_velocities(history);
    const int slots = static_cast<int>(now.agents.size()) + 1;
    Eigen::Matrix4d agent_initial = Eigen::Matrix4d::Zero();
    agent_initial(0, 0) = agent_initial(1, 1) = config_.agent_position_std * config_.agent_position_std;
    const auto agent_cov = covariance_track(config_.agent_noise, horizon, agent_initial);
    const auto ego_cov = covariance_track(config_.ego_noise, horizon);

    std::vector<ModePrediction> out;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const ModeSeed& seed = seeds[order[rank]];
      const Rollout r = rollout(now, nominal_controls, horizon, desired, seed.bias, true);
      ModePrediction mp;
      mp.mode_id = static_cast<int>(order[rank]);
      mp.gamma = seed.gamma;
      mp.passing = seed.passing;
      mp.means.assign(static_cast<std::size_t>(slots), {});
      mp.covariances.assign(static_cast<std::size_t>(slots), {});
      mp.jacobians.assign(static_cast<std::size_t>(slots), {});
      for (int s = 0; s < slots; ++s) {
        auto& means = mp.means[static_cast<std::size_t>(s)];
        auto& jacs = mp.jacobians[static_cast<std::size_t>(s)];
        for (int k = 0; k <= horizon; ++k) {
          means.push_back(r.states[static_cast<std::size_t>(k)].agent_or_ego(s));
          jacs.push_back(r.jacobians[static_cast<std::size_t>(k)].middleRows(4 * s, 4));
        }
        mp.covariances[static_cast<std::size_t>(s)] = s == 0 ? ego_cov : agent_cov;
      }
      out.push_back(std::move(mp));
    }
    return out;
  }

  // Sigma(0) = initial, Sigma(k+1) = F Sigma(k) F^T + Q: accumulated white
  // acceleration noise through the double integrator.
  std::vector<Eigen::Matrix4d> covariance_track(double noise_rate, int horizon,
                                                const Eigen::Matrix4d& initial = Eigen::Matrix4d::Zero()) const {
    Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
    f.block<2, 2>(0, 2) = config_.dt * Matrix2d::Identity();
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    q(2, 2) = q(3, 3) = noise_rate * config_.dt;
    std::vector<Eigen::Matrix4d> out;
    out.push_back(initial);
    for (int k = 0; k < horizon; ++k) {
      Eigen::Matrix4d next = f * out.back() * f.transpose() + q;
      next = 0.5 * (next + next.transpose()).eval();
      out.push_back(next);
    }
    return out;
  }

 private:
  using Matrix2d = Eigen::Matrix2d;

  static void validate(const StateHistory& history, int horizon) {
    if (history.frames.empty()) throw InvalidArgument("predict: empty state history");
    if (horizon < 1) throw InvalidArgument("predict: horizon must be >= 1");
    for (const auto& f : history.frames) {
      if (!f.ego.allFinite()) throw InvalidArgument("predict: non-finite ego state in history");
      for (const auto& a : f.agents)
        if (!a.allFinite()) throw InvalidArgument("predict: non-finite agent state in history");
    }
  }

  PredictorConfig config_;
  std::vector<dynamics::Box> obstacles_;
};

}  // namespace zapp
