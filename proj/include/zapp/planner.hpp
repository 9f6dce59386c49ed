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
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zapp/constraints.hpp"
#include "zapp/error.hpp"
#include "zapp/predictor.hpp"
#include "zapp/reachset.hpp"
#include "zapp/solver.hpp"
#include "zapp/zonotope.hpp"

namespace zapp {

enum class Variant {
  kZapp,               // continuous-time pieces, interaction Jacobians
  kZappNoInteraction,  // continuous-time pieces, predictions frozen w.r.t. the ego plan
  kDiscreteBaseline,   // constraints at the discrete steps only
};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kZapp: return "zapp";
    case Variant::kZappNoInteraction: return "zapp-no-interaction";
    default: return "discrete-baseline";
  }
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "zapp") return Variant::kZapp;
  if (s == "zapp-no-interaction") return Variant::kZappNoInteraction;
  if (s == "discrete-baseline") return Variant::kDiscreteBaseline;
  return std::nullopt;
}

struct PlannerConfig {
  Variant variant = Variant::kZapp;
  double dt = 0.1;
  int horizon = 16;
  int consensus_steps = 5;  // kc: controls k = 0..kc are shared by all modes
  int replan_steps = 5;     // steps applied per execution (2 Hz at dt = 0.1)
  int mode_count = 2;
  int constrained_agents = 3;
  double u_max = 3.0;   // absolute acceleration limit per axis [m/s^2]
  double du_max = 3.0;  // perturbation limit per axis [m/s^2]
  double v_max = 4.0;   // ego velocity limit per axis [m/s]
  double weight_terminal = 1.0;
  double weight_effort = 0.1;
  double alpha = 1.0;
  double safety_margin = 0.05;     // [m]
  double agent_half_width = 0.5;   // agent footprint half side [m]
  double nominal_speed = 3.8;      // cruise speed of the nominal plan [m/s]
  double nominal_position_gain = 0.5;
  double nominal_velocity_gain = 2.0;
  double cull_distance = 12.0;     // records with nominal g above this are skipped [m]
  bool smooth_max = false;
  double smooth_temperature = 50.0;
  SolverOptions solver;
};

// Decision vector: one shared block for k = 0..kc, then one block per mode
// for k = kc+1..kf-1. Consensus holds by construction.
struct DecisionLayout {
  int modes = 1;
  int horizon = 16;
  int consensus = 5;

  int shared_steps() const { return std::min(consensus + 1, horizon); }
  int mode_steps() const { return horizon - shared_steps(); }
  Index size() const { return 2 * shared_steps() + 2 * static_cast<Index>(modes) * mode_steps(); }

  Index index(int mode, int k, int c) const {
    if (k < shared_steps()) return 2 * k + c;
    return 2 * shared_steps() + 2 * (static_cast<Index>(mode) * mode_steps() + (k - shared_steps())) + c;
  }

  ControlSequence perturbation(const VectorXd& x, int mode) const {
    ControlSequence out(static_cast<std::size_t>(horizon));
    for (int k = 0; k < horizon; ++k) out[static_cast<std::size_t>(k)] = {x(index(mode, k, 0)), x(index(mode, k, 1))};
    return out;
  }

  // rows x 2kf (control-sequence Jacobian) -> rows x size().
  MatrixXd map_columns(const MatrixXd& jac_u, int mode) const {
    MatrixXd out = MatrixXd::Zero(jac_u.rows(), size());
    for (int k = 0; k < horizon; ++k)
      for (int c = 0; c < 2; ++c) out.col(index(mode, k, c)) += jac_u.col(2 * k + c);
    return out;
  }
};

// Open-loop sequence that drives the ego straight at the goal: track a
// desired velocity toward the goal with speed min(cruise, kp * distance),
// per-axis acceleration clamped to u_max. Obstacles and agents are ignored.
inline ControlSequence nominal_controls(const Eigen::Vector4d& ego, const Vector2d& goal, const PlannerConfig& cfg) {
  ControlSequence out;
  Vector2d p = ego.head<2>();
  Vector2d v = ego.tail<2>();
  for (int k = 0; k < cfg.horizon; ++k) {
    const Vector2d to_goal = goal - p;
    const double dist = to_goal.norm();
    Vector2d v_des = Vector2d::Zero();
    if (dist > 1e-12) v_des = to_goal / dist * std::min(cfg.nominal_speed, cfg.nominal_position_gain * dist);
    Vector2d u = cfg.nominal_velocity_gain * (v_des - v);
    u = u.cwiseMax(-cfg.u_max).cwiseMin(cfg.u_max);
    if (dist <= 1e-12 && v.norm() <= 1e-12) u.setZero();
    out.push_back(u);
    const Vector2d v_next = v + u * cfg.dt;
    p += 0.5 * (v + v_next) * cfg.dt;
    v = v_next;
  }
  return out;
}

// Decelerate toward rest as fast as the limits allow.
inline ControlSequence braking_controls(const Eigen::Vector4d& ego, const PlannerConfig& cfg) {
  ControlSequence out;
  Vector2d v = ego.tail<2>();
  for (int k = 0; k < cfg.horizon; ++k) {
    const Vector2d u = (-v / cfg.dt).cwiseMax(-cfg.u_max).cwiseMin(cfg.u_max);
    out.push_back(u);
    v += u * cfg.dt;
  }
  return out;
}

// mu_hat(k) = mu_nom(k) + J(k) dU for one slot of one mode.
inline std::vector<Eigen::Vector4d> taylor_expand_means(const ModePrediction& pred, int slot, const VectorXd& delta_u) {
  const auto& means = pred.means.at(static_cast<std::size_t>(slot));
  const auto& jacs = pred.jacobians.at(static_cast<std::size_t>(slot));
  std::vector<Eigen::Vector4d> out;
  out.reserve(means.size());
  for (std::size_t k = 0; k < means.size(); ++k) {
    if (jacs[k].cols() != delta_u.size()) throw DimensionMismatch("taylor_expand_means", jacs[k].cols(), delta_u.size());
    out.emplace_back(means[k] + jacs[k] * delta_u);
  }
  return out;
}

// Ego position/velocity along one mode's plan, affine in the decision vector.
struct EgoTrack {
  std::vector<AffineVec2> position;  // k = 0..kf
  std::vector<AffineVec2> velocity;
};

class PlanningProblem final : public BarrierProblem {
 public:
  DecisionLayout layout;
  std::vector<double> gamma;  // renormalized over the planned modes
  ControlSequence nominal;
  Vector2d goal = Vector2d::Zero();
  std::vector<EgoTrack> ego;
  std::vector<ConstraintRecord> records;
  MatrixXd linear_a;  // linear_a x <= linear_b (ego velocity limits)
  VectorXd linear_b;
  VectorXd lo;
  VectorXd hi;
  double weight_terminal = 1.0;
  double weight_effort = 0.1;
  bool smooth_max = false;
  double smooth_temperature = 50.0;

  Index dimension() const override { return layout.size(); }

  double cost(const VectorXd& x) const override {
    double total = 0.0;
    for (int y = 0; y < layout.modes; ++y) {
      const Vector2d err = ego[static_cast<std::size_t>(y)].position.back().at(x) - goal;
      double effort = 0.0;
      for (int k = 0; k < layout.horizon; ++k) {
        const Vector2d u = nominal[static_cast<std::size_t>(k)] +
                           Vector2d(x(layout.index(y, k, 0)), x(layout.index(y, k, 1)));
        effort += u.squaredNorm();
      }
      total += gamma[static_cast<std::size_t>(y)] * (weight_terminal * err.squaredNorm() + weight_effort * effort);
    }
    return total;
  }

  VectorXd cost_gradient(const VectorXd& x) const override {
    VectorXd grad = VectorXd::Zero(dimension());
    for (int y = 0; y < layout.modes; ++y) {
      const double w = gamma[static_cast<std::size_t>(y)];
      const AffineVec2& terminal = ego[static_cast<std::size_t>(y)].position.back();
      const Vector2d err = terminal.at(x) - goal;
      if (!terminal.is_constant()) grad += 2.0 * w * weight_terminal * terminal.jac.transpose() * err;
      for (int k = 0; k < layout.horizon; ++k)
        for (int c = 0; c < 2; ++c) {
          const Index i = layout.index(y, k, c);
          grad(i) += 2.0 * w * weight_effort * (nominal[static_cast<std::size_t>(k)](c) + x(i));
        }
    }
    return grad;
  }

  MatrixXd cost_hessian(const VectorXd&) const override {
    MatrixXd hess = MatrixXd::Zero(dimension(), dimension());
    for (int y = 0; y < layout.modes; ++y) {
      const double w = gamma[static_cast<std::size_t>(y)];
      const AffineVec2& terminal = ego[static_cast<std::size_t>(y)].position.back();
      if (!terminal.is_constant()) hess += 2.0 * w * weight_terminal * terminal.jac.transpose() * terminal.jac;
      for (int k = 0; k < layout.horizon; ++k)
        for (int c = 0; c < 2; ++c) {
          const Index i = layout.index(y, k, c);
          hess(i, i) += 2.0 * w * weight_effort;
        }
    }
    return hess;
  }

  Index num_constraints() const override { return static_cast<Index>(records.size()) + linear_b.size(); }

  double record_value(const ConstraintRecord& rec, const VectorXd& x) const {
    return smooth_max ? evaluate_smooth(rec, x, smooth_temperature) : evaluate(rec, x).g;
  }

  VectorXd record_gradient(const ConstraintRecord& rec, const VectorXd& x) const {
    return smooth_max ? constraint_gradient_smooth(rec, x, dimension(), smooth_temperature)
                      : constraint_gradient(rec, x, dimension());
  }

  void constraints(const VectorXd& x, VectorXd& values, MatrixXd* jacobian) const override {
    const Index nr = static_cast<Index>(records.size());
    values.resize(num_constraints());
    if (jacobian) jacobian->resize(num_constraints(), dimension());
    for (Index r = 0; r < nr; ++r) {
      const auto& rec = records[static_cast<std::size_t>(r)];
      values(r) = record_value(rec, x) - rec.margin;
      if (!std::isfinite(values(r))) {
        throw NumericalError("planner: non-finite value in " + rec.describe());
      }
      if (jacobian) {
        const VectorXd g = record_gradient(rec, x);
        if (!g.allFinite()) throw NumericalError("planner: non-finite gradient in " + rec.describe());
        jacobian->row(r) = g.transpose();
      }
    }
    if (linear_b.size() > 0) {
      values.tail(linear_b.size()) = linear_b - linear_a * x;
      if (jacobian) jacobian->bottomRows(linear_b.size()) = -linear_a;
    }
  }

  const VectorXd& lower() const override { return lo; }
  const VectorXd& upper() const override { return hi; }
};

namespace detail {

inline std::vector<AffineVec2> planar_generators(const Zonotope& state_set) {
  std::vector<AffineVec2> out;
  const Zonotope pos = project(state_set, {0, 1});
  for (Index j = 0; j < pos.num_generators(); ++j) {
    const Vector2d g = pos.generators().col(j);
    if (g.norm() >= kGeneratorEpsilon) out.emplace_back(g);
  }
  return out;
}

}  // namespace detail

// Slots (1-based agent indices) of the n agents closest to the ego now.
inline std::vector<int> closest_agents(const dynamics::World& now, int count) {
  std::vector<std::pair<double, int>> d;
  for (std::size_t i = 0; i < now.agents.size(); ++i) {
    d.emplace_back((now.agents[i].head<2>() - now.ego.head<2>()).norm(), static_cast<int>(i) + 1);
  }
  std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<int> out;
  for (int i = 0; i < count && i < static_cast<int>(d.size()); ++i) out.push_back(d[static_cast<std::size_t>(i)].second);
  return out;
}

// Builds cost, collision records, velocity limits and bounds of one MPC
// execution from a single predictor evaluation.
inline PlanningProblem assemble_problem(const std::vector<ModePrediction>& preds, const ControlSequence& nominal,
                                        const dynamics::World& now, const Vector2d& goal,
                                        const std::vector<Zonotope>& obstacles, const PlannerConfig& cfg) {
  if (preds.empty()) throw InvalidArgument("assemble_problem: no modes");
  PlanningProblem prob;
  prob.layout = DecisionLayout{static_cast<int>(preds.size()), cfg.horizon, cfg.consensus_steps};
  prob.nominal = nominal;
  prob.goal = goal;
  prob.weight_terminal = cfg.weight_terminal;
  prob.weight_effort = cfg.weight_effort;
  prob.smooth_max = cfg.smooth_max;
  prob.smooth_temperature = cfg.smooth_temperature;
  const Index n = prob.layout.size();
  const int kf = cfg.horizon;

  double gamma_total = 0.0;
  for (const auto& p : preds) gamma_total += p.gamma;
  for (const auto& p : preds) prob.gamma.push_back(gamma_total > 0.0 ? p.gamma / gamma_total : 1.0 / preds.size());

  const std::vector<int> agents = closest_agents(now, cfg.constrained_agents);
  const bool continuous = cfg.variant != Variant::kDiscreteBaseline;
  const bool agent_gradients = cfg.variant != Variant::kZappNoInteraction;

  std::vector<AffineVec2> footprint{AffineVec2(Vector2d(cfg.agent_half_width, 0.0)),
                                    AffineVec2(Vector2d(0.0, cfg.agent_half_width))};
  const double margin = cfg.safety_margin;
  const VectorXd zero = VectorXd::Zero(n);

  std::vector<Eigen::RowVectorXd> lin_rows;
  std::vector<double> lin_b;

  for (int y = 0; y < prob.layout.modes; ++y) {
    const ModePrediction& pred = preds[static_cast<std::size_t>(y)];
    if (pred.horizon() != kf) throw DimensionMismatch("assemble_problem horizon", pred.horizon(), kf);
    const DiscreteReachSet dr = discrete_reach(pred, cfg.alpha);

    auto track = [&](int slot, bool movable) {
      std::vector<AffineVec2> pos;
      std::vector<AffineVec2> vel;
      for (int k = 0; k <= kf; ++k) {
        const auto& mean = pred.means[static_cast<std::size_t>(slot)][static_cast<std::size_t>(k)];
        if (movable) {
          const MatrixXd jx = prob.layout.map_columns(pred.jacobians[static_cast<std::size_t>(slot)][static_cast<std::size_t>(k)], y);
          pos.emplace_back(mean.head<2>(), jx.topRows(2));
          vel.emplace_back(mean.tail<2>(), jx.bottomRows(2));
        } else {
          pos.emplace_back(mean.head<2>());
          vel.emplace_back(mean.tail<2>());
        }
      }
      return std::make_pair(pos, vel);
    };

    auto [ego_pos, ego_vel] = track(0, true);
    prob.ego.push_back(EgoTrack{ego_pos, ego_vel});

    // Pieces for one slot: continuous -> (a, b) per interval, discrete -> one per step k >= 1.
    auto pieces_for = [&](int slot, const std::vector<AffineVec2>& pos, bool with_footprint) {
      std::vector<std::pair<PlanarPiece, UnionPiece>> out;
      const auto& sets = dr.sets[static_cast<std::size_t>(slot)];
      auto base = [&](int k) {
        std::vector<AffineVec2> g = detail::planar_generators(sets[static_cast<std::size_t>(k)]);
        if (with_footprint) g.insert(g.end(), footprint.begin(), footprint.end());
        return g;
      };
      if (continuous) {
        for (int k = 0; k < kf; ++k) {
          const auto off = continuous_piece_offsets(pos[static_cast<std::size_t>(k)], pos[static_cast<std::size_t>(k) + 1]);
          PlanarPiece a{off.center_a, base(k)};
          a.generators.push_back(off.generator);
          PlanarPiece b{off.center_b, base(k + 1)};
          b.generators.push_back(off.generator);
          out.emplace_back(std::move(a), UnionPiece::kA);
          out.emplace_back(std::move(b), UnionPiece::kB);
        }
      } else {
        for (int k = 1; k <= kf; ++k) out.emplace_back(PlanarPiece{pos[static_cast<std::size_t>(k)], base(k)}, UnionPiece::kDiscrete);
      }
      return out;
    };

    const auto ego_pieces = pieces_for(0, ego_pos, false);
    auto interval_of = [&](std::size_t idx) {
      return continuous ? static_cast<int>(idx / 2) : static_cast<int>(idx) + 1;
    };

    for (int slot : agents) {
      const auto [apos, avel] = track(slot, agent_gradients);
      const auto agent_pieces = pieces_for(slot, apos, true);
      for (std::size_t p = 0; p < ego_pieces.size(); ++p) {
        ConstraintRecord rec = dynamic_constraint(ego_pieces[p].first, agent_pieces[p].first, margin);
        rec.mode = y;
        rec.interval = interval_of(p);
        rec.counterpart = slot;
        rec.piece = ego_pieces[p].second;
        if (evaluate(rec, zero).g > cfg.cull_distance) continue;
        prob.records.push_back(std::move(rec));
      }
    }
    for (std::size_t j = 0; j < obstacles.size(); ++j) {
      for (std::size_t p = 0; p < ego_pieces.size(); ++p) {
        ConstraintRecord rec = static_constraint(ego_pieces[p].first, obstacles[j], margin);
        rec.mode = y;
        rec.interval = interval_of(p);
        rec.counterpart = static_cast<int>(j);
        rec.piece = ego_pieces[p].second;
        if (evaluate(rec, zero).g > cfg.cull_distance) continue;
        prob.records.push_back(std::move(rec));
      }
    }

    for (int k = 1; k <= kf; ++k) {
      const AffineVec2& v = ego_vel[static_cast<std::size_t>(k)];
      for (int c = 0; c < 2; ++c)
        for (double s : {1.0, -1.0}) {
          lin_rows.push_back(s * v.jac.row(c));
          lin_b.push_back(cfg.v_max - s * v.value(c));
        }
    }
  }

  prob.linear_a.resize(static_cast<Index>(lin_rows.size()), n);
  prob.linear_b.resize(static_cast<Index>(lin_b.size()));
  for (std::size_t r = 0; r < lin_rows.size(); ++r) {
    prob.linear_a.row(static_cast<Index>(r)) = lin_rows[r];
    prob.linear_b(static_cast<Index>(r)) = lin_b[r];
  }

  prob.lo.resize(n);
  prob.hi.resize(n);
  for (int y = 0; y < prob.layout.modes; ++y)
    for (int k = 0; k < kf; ++k)
      for (int c = 0; c < 2; ++c) {
        const Index i = prob.layout.index(y, k, c);
        const double u = nominal[static_cast<std::size_t>(k)](c);
        prob.lo(i) = std::max(-cfg.du_max, -cfg.u_max - u);
        prob.hi(i) = std::min(cfg.du_max, cfg.u_max - u);
      }
  return prob;
}

struct PlanResult {
  DecisionLayout layout;
  VectorXd decision;
  std::vector<ControlSequence> perturbations;  // dU per mode
  std::vector<ControlSequence> controls;       // u_nom + dU per mode, clamped
  ControlSequence applied;                     // first replan_steps of the shared block
  std::vector<std::vector<Vector2d>> planned_positions;  // per mode, k = 0..kf
  std::vector<double> gamma;
  double cost = 0.0;
  double min_slack = 0.0;        // min over constraints of g - margin (solver view)
  double audit_min_slack = 0.0;  // same, re-evaluated through the zonotope route
  bool feasible = false;
  bool fallback = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double wall_time_s = 0.0;
  std::size_t num_records = 0;
  std::vector<std::vector<double>> merit_history;
};

// min_r (g_r - margin_r) with each record rebuilt as a plain zonotope:
// collision_zonotope -> normalize_generators -> to_hrep -> margin.
inline double feasibility_audit(const PlanningProblem& prob, const VectorXd& x) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& rec : prob.records) {
    const Zonotope ego = rec.ego.at(x);
    const Zonotope other = rec.other.at(x);
    const HPolytope h = to_hrep(normalize_generators(collision_zonotope(ego, other)));
    worst = std::min(worst, point_outside_margin(h, ego.center()) - rec.margin);
  }
  return worst;
}

// Previous plan advanced by `shift` steps (the replan period), last control
// repeated, then re-expressed against the new nominal. The shared block
// follows the most likely previous mode. Zeros (the nominal) when there is
// no usable previous plan.
inline VectorXd warmstart_shift(const PlanResult* previous, const DecisionLayout& layout, const ControlSequence& nominal,
                                int shift = 1) {
  VectorXd x = VectorXd::Zero(layout.size());
  if (!previous || previous->fallback || previous->controls.empty()) return x;
  if (previous->layout.horizon != layout.horizon || static_cast<int>(nominal.size()) != layout.horizon) return x;
  if (shift < 0) throw InvalidArgument("warmstart_shift: negative shift");
  std::size_t likely = 0;
  for (std::size_t y = 1; y < previous->gamma.size() && y < previous->controls.size(); ++y)
    if (previous->gamma[y] > previous->gamma[likely]) likely = y;
  const int shared = layout.shared_steps();
  for (int y = 0; y < layout.modes; ++y) {
    const std::size_t src_mode = std::min(static_cast<std::size_t>(y), previous->controls.size() - 1);
    for (int k = 0; k < layout.horizon; ++k) {
      const auto& seq = previous->controls[k < shared ? likely : src_mode];
      const auto src = static_cast<std::size_t>(std::min(k + shift, layout.horizon - 1));
      for (int c = 0; c < 2; ++c) x(layout.index(y, k, c)) = seq[src](c) - nominal[static_cast<std::size_t>(k)](c);
    }
  }
  return x;
}

inline PlanResult make_plan_result(const PlanningProblem& prob, const VectorXd& x, const PlannerConfig& cfg) {
  PlanResult res;
  res.layout = prob.layout;
  res.decision = x;
  res.gamma = prob.gamma;
  res.num_records = prob.records.size();
  for (int y = 0; y < prob.layout.modes; ++y) {
    ControlSequence du = prob.layout.perturbation(x, y);
    ControlSequence u(du.size());
    for (std::size_t k = 0; k < du.size(); ++k) {
      u[k] = (prob.nominal[k] + du[k]).cwiseMax(-cfg.u_max).cwiseMin(cfg.u_max);
    }
    std::vector<Vector2d> pos;
    for (const auto& p : prob.ego[static_cast<std::size_t>(y)].position) pos.push_back(p.at(x));
    res.perturbations.push_back(std::move(du));
    res.controls.push_back(std::move(u));
    res.planned_positions.push_back(std::move(pos));
  }
  const int steps = std::min(cfg.replan_steps, prob.layout.shared_steps());
  res.applied.assign(res.controls.front().begin(), res.controls.front().begin() + steps);
  res.cost = prob.cost(x);
  return res;
}

// Barrier solve of one assembled problem, with the braking fallback when no
// strictly feasible iterate exists.
// Decision vector that reproduces the braking sequence in every mode.
inline VectorXd braking_decision(const PlanningProblem& prob, const Eigen::Vector4d& ego_now, const PlannerConfig& cfg) {
  const ControlSequence brake = braking_controls(ego_now, cfg);
  VectorXd x(prob.dimension());
  for (int y = 0; y < prob.layout.modes; ++y)
    for (int k = 0; k < prob.layout.horizon; ++k)
      for (int c = 0; c < 2; ++c) {
        const auto ks = static_cast<std::size_t>(k);
        x(prob.layout.index(y, k, c)) = brake[ks](c) - prob.nominal[ks](c);
      }
  return x.cwiseMax(prob.lo).cwiseMin(prob.hi);
}

inline PlanResult solve(const PlanningProblem& prob, const VectorXd& start, const PlannerConfig& cfg,
                        const Eigen::Vector4d& ego_now, bool warm = false) {
  const auto t0 = std::chrono::steady_clock::now();
  // Phase 1 only finds a local minimizer of the worst violation, so start
  // from the braking plan when it violates less than the warmstart.
  VectorXd x0 = start;
  if (prob.num_constraints() > 0) {
    VectorXd h_start;
    VectorXd h_brake;
    const VectorXd brake = braking_decision(prob, ego_now, cfg);
    prob.constraints(start, h_start, nullptr);
    if (h_start.minCoeff() <= 0.0) {
      prob.constraints(brake, h_brake, nullptr);
      if (h_brake.minCoeff() > h_start.minCoeff()) {
        x0 = brake;
        warm = false;
      }
    }
  }
  const SolveOutput sol = barrier_solve(prob, x0, cfg.solver, warm);
  PlanResult res;
  if (sol.stats.feasible) {
    res = make_plan_result(prob, sol.x, cfg);
    res.feasible = true;
  } else {
    res = make_plan_result(prob, VectorXd::Zero(prob.dimension()), cfg);
    const ControlSequence brake = braking_controls(ego_now, cfg);
    for (auto& u : res.controls) u = brake;
    for (auto& du : res.perturbations)
      for (std::size_t k = 0; k < du.size(); ++k) du[k] = brake[k] - prob.nominal[k];
    res.applied.assign(brake.begin(), brake.begin() + static_cast<long>(res.applied.size()));
    res.feasible = false;
    res.fallback = true;
  }
  res.min_slack = sol.stats.min_slack;
  res.audit_min_slack = res.fallback ? sol.stats.min_slack : feasibility_audit(prob, sol.x);
  res.outer_iterations = sol.stats.outer_iterations;
  res.inner_iterations = sol.stats.inner_iterations;
  res.merit_history = sol.stats.merit_history;
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct MpcInput {
  const StateHistory* history = nullptr;
  Vector2d goal = Vector2d::Zero();
  const std::vector<Zonotope>* obstacles = nullptr;
  const PlanResult* previous = nullptr;
};

// One receding-horizon execution: nominal controls, a single predictor
// evaluation, problem assembly, warmstarted solve.
inline PlanResult mpc_step(const Predictor& predictor, const MpcInput& in, const PlannerConfig& cfg,
                           PlanningProblem* problem_out = nullptr) {
  if (!in.history || in.history->frames.empty()) throw InvalidArgument("mpc_step: empty history");
  const auto t0 = std::chrono::steady_clock::now();
  const dynamics::World& now = in.history->current();
  const ControlSequence nominal = nominal_controls(now.ego, in.goal, cfg);
  const auto preds = predictor.predict(*in.history, nominal, cfg.horizon, cfg.mode_count);
  static const std::vector<Zonotope> kNoObstacles;
  PlanningProblem prob = assemble_problem(preds, nominal, now, in.goal, in.obstacles ? *in.obstacles : kNoObstacles, cfg);
  const VectorXd start = warmstart_shift(in.previous, prob.layout, nominal, cfg.replan_steps);
  const bool warm = in.previous && !in.previous->fallback;
  PlanResult res = solve(prob, start, cfg, now.ego, warm);
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (problem_out) *problem_out = std::move(prob);
  return res;
}

}  // namespace zapp
