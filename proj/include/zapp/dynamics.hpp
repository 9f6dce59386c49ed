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
#include <cmath>
#include <span>
#include <vector>

#include "zapp/error.hpp"
#include "zapp/zonotope.hpp"

// Double-integrator agents driven by social forces. One step function serves
// both the ground-truth simulator (fine dt, true desired velocities) and the
// surrogate predictor (planner dt, estimated desired velocities), and can
// return the step Jacobians for rollout differentiation.
namespace zapp::dynamics {

using State = Eigen::Vector4d;  // (px, py, vx, vy)
using Eigen::Matrix2d;

struct ForceParams {
  double agent_gain = 2.0;     // non-ego pair repulsion [m^3/s^2]
  double ego_gain = 0.4;       // repulsion of agents away from the ego [m^3/s^2]
  double obstacle_gain = 1.0;  // wall repulsion, scaled by approach speed / distance [m]
  double relax_time = 1.0;     // desired-velocity relaxation time constant [s]
  double v_max = 4.0;          // per-axis velocity limit [m/s]
  double a_max = 3.0;          // per-axis acceleration limit [m/s^2]
  double obstacle_min_distance = 0.05;
  double min_separation = 1e-6;
};

// Axis-aligned footprint used for wall forces.
struct Box {
  Vector2d lo;
  Vector2d hi;
};

inline Box interval_hull(const Zonotope& z) {
  if (z.dim() != 2) throw DimensionMismatch("interval_hull", z.dim(), 2);
  const Vector2d radius = z.generators().cwiseAbs().rowwise().sum();
  return Box{z.center().head<2>() - radius, z.center().head<2>() + radius};
}

struct World {
  State ego = State::Zero();
  std::vector<State> agents;

  Index size() const { return 4 * (1 + static_cast<Index>(agents.size())); }

  const State& agent_or_ego(Index slot) const {
    return slot == 0 ? ego : agents[static_cast<std::size_t>(slot - 1)];
  }
};

inline VectorXd stack(const World& w) {
  VectorXd s(w.size());
  s.segment<4>(0) = w.ego;
  for (std::size_t i = 0; i < w.agents.size(); ++i) s.segment<4>(4 * (static_cast<Index>(i) + 1)) = w.agents[i];
  return s;
}

inline World unstack(const VectorXd& s) {
  World w;
  w.ego = s.segment<4>(0);
  const Index m = s.size() / 4 - 1;
  w.agents.resize(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) w.agents[static_cast<std::size_t>(i)] = s.segment<4>(4 * (i + 1));
  return w;
}

// Everything besides the state that shapes one agent's acceleration.
struct Environment {
  std::span<const Vector2d> desired_velocity;  // one per agent
  std::span<const Vector2d> bias;              // optional, one per agent
  std::span<const Box> obstacles;
};

namespace detail {

inline double clamp_with_mask(double x, double limit, double& mask) {
  if (x > limit) {
    mask = 0.0;
    return limit;
  }
  if (x < -limit) {
    mask = 0.0;
    return -limit;
  }
  mask = 1.0;
  return x;
}

// Inverse-square repulsion gain * r / |r|^3 and its derivative in r.
inline Vector2d inverse_square(const Vector2d& r, double gain, double min_sep, Matrix2d* d_dr) {
  const double d = r.norm();
  if (!(d >= min_sep)) {
    throw NumericalError("social force: coincident agents (separation " + std::to_string(d) + " m)");
  }
  const double d3 = d * d * d;
  if (d_dr) *d_dr = gain * (Matrix2d::Identity() / d3 - 3.0 * r * r.transpose() / (d3 * d * d));
  return gain * r / d3;
}

// Wall repulsion gain * max(0, -v.n) / d * n with n the outward unit normal
// from the nearest box point.
inline Vector2d wall_force(const Vector2d& p, const Vector2d& v, const Box& box, double gain,
                           double min_dist, Matrix2d* d_dp, Matrix2d* d_dv) {
  if (d_dp) d_dp->setZero();
  if (d_dv) d_dv->setZero();
  const Vector2d q = p.cwiseMax(box.lo).cwiseMin(box.hi);
  const Vector2d r = p - q;
  const double d = r.norm();
  if (d < 1e-9) return Vector2d::Zero();
  const Vector2d n = r / d;
  const double s = -v.dot(n);
  if (s <= 0.0) return Vector2d::Zero();
  const double de = std::max(d, min_dist);
  const Vector2d f = gain * s / de * n;
  if (d_dp || d_dv) {
    Matrix2d mask = Matrix2d::Zero();
    mask(0, 0) = (p.x() < box.lo.x() || p.x() > box.hi.x()) ? 1.0 : 0.0;
    mask(1, 1) = (p.y() < box.lo.y() || p.y() > box.hi.y()) ? 1.0 : 0.0;
    const Matrix2d dn_dp = (Matrix2d::Identity() - n * n.transpose()) * mask / d;
    const Eigen::RowVector2d dde_dp =
        d > min_dist ? Eigen::RowVector2d(n.transpose() * mask) : Eigen::RowVector2d::Zero();
    const Eigen::RowVector2d ds_dp = -v.transpose() * dn_dp;
    if (d_dp) *d_dp = gain * (n * ds_dp / de + s * dn_dp / de - s * n * dde_dp / (de * de));
    if (d_dv) *d_dv = -gain * n * n.transpose() / de;
  }
  return f;
}

}  // namespace detail

// Unclamped acceleration of agent `i` (0-based among non-ego agents). When
// `jac` is given it receives d(acc)/d(stacked state), shape 2 x w.size().
inline Vector2d agent_acceleration(const World& w, std::size_t i, const Environment& env,
                                   const ForceParams& fp, Eigen::Matrix<double, 2, Eigen::Dynamic>* jac) {
  const State& xi = w.agents[i];
  const Vector2d pi = xi.head<2>();
  const Vector2d vi = xi.tail<2>();
  const Index self = 4 * (static_cast<Index>(i) + 1);
  if (jac) jac->setZero(2, w.size());

  Vector2d acc = (env.desired_velocity[i] - vi) / fp.relax_time;
  if (jac) jac->block<2, 2>(0, self + 2) -= Matrix2d::Identity() / fp.relax_time;

  Matrix2d d_dr;
  for (std::size_t j = 0; j < w.agents.size(); ++j) {
    if (j == i) continue;
    const Vector2d r = pi - w.agents[j].head<2>();
    acc += detail::inverse_square(r, fp.agent_gain, fp.min_separation, jac ? &d_dr : nullptr);
    if (jac) {
      const Index other = 4 * (static_cast<Index>(j) + 1);
      jac->block<2, 2>(0, self) += d_dr;
      jac->block<2, 2>(0, other) -= d_dr;
    }
  }

  {
    const Vector2d r = pi - w.ego.head<2>();
    acc += detail::inverse_square(r, fp.ego_gain, fp.min_separation, jac ? &d_dr : nullptr);
    if (jac) {
      jac->block<2, 2>(0, self) += d_dr;
      jac->block<2, 2>(0, 0) -= d_dr;
    }
  }

  Matrix2d d_dp;
  Matrix2d d_dv;
  for (const Box& box : env.obstacles) {
    acc += detail::wall_force(pi, vi, box, fp.obstacle_gain, fp.obstacle_min_distance,
                              jac ? &d_dp : nullptr, jac ? &d_dv : nullptr);
    if (jac) {
      jac->block<2, 2>(0, self) += d_dp;
      jac->block<2, 2>(0, self + 2) += d_dv;
    }
  }

  if (!env.bias.empty()) acc += env.bias[i];
  if (!acc.allFinite()) throw NumericalError("social force: non-finite acceleration");
  return acc;
}

struct StepJacobians {
  MatrixXd state;    // d next / d current, size x size
  MatrixXd control;  // d next / d ego control, size x 2
};

// Advances every agent by dt. Agents: semi-implicit Euler with clamped
// acceleration and velocity. Ego: zero-order-hold control, trapezoidal
// position update (exact for the unclamped double integrator).
inline World step(const World& w, const Vector2d& ego_control, double dt, const Environment& env,
                  const ForceParams& fp, StepJacobians* jac = nullptr) {
  World next;
  next.agents.resize(w.agents.size());
  const Index n = w.size();
  if (jac) {
    jac->state.setZero(n, n);
    jac->control.setZero(n, 2);
  }

  // ego
  {
    const Vector2d v = w.ego.tail<2>();
    Vector2d u;
    Vector2d v_next;
    Vector2d mask_u;
    Vector2d mask_v;
    for (int c = 0; c < 2; ++c) {
      u(c) = detail::clamp_with_mask(ego_control(c), fp.a_max, mask_u(c));
      v_next(c) = detail::clamp_with_mask(v(c) + u(c) * dt, fp.v_max, mask_v(c));
    }
    next.ego.head<2>() = w.ego.head<2>() + 0.5 * (v + v_next) * dt;
    next.ego.tail<2>() = v_next;
    if (jac) {
      const Matrix2d dv = mask_v.asDiagonal();
      const Matrix2d du = mask_u.asDiagonal();
      jac->state.block<2, 2>(0, 0) = Matrix2d::Identity();
      jac->state.block<2, 2>(0, 2) = 0.5 * dt * (Matrix2d::Identity() + dv);
      jac->state.block<2, 2>(2, 2) = dv;
      jac->control.block<2, 2>(2, 0) = dt * dv * du;
      jac->control.block<2, 2>(0, 0) = 0.5 * dt * dt * dv * du;
    }
  }

  Eigen::Matrix<double, 2, Eigen::Dynamic> dacc;
  for (std::size_t i = 0; i < w.agents.size(); ++i) {
    const Index row = 4 * (static_cast<Index>(i) + 1);
    const Vector2d raw = agent_acceleration(w, i, env, fp, jac ? &dacc : nullptr);
    const Vector2d v = w.agents[i].tail<2>();
    Vector2d a;
    Vector2d v_next;
    Vector2d mask_a;
    Vector2d mask_v;
    for (int c = 0; c < 2; ++c) {
      a(c) = detail::clamp_with_mask(raw(c), fp.a_max, mask_a(c));
      v_next(c) = detail::clamp_with_mask(v(c) + a(c) * dt, fp.v_max, mask_v(c));
    }
    next.agents[i].tail<2>() = v_next;
    next.agents[i].head<2>() = w.agents[i].head<2>() + v_next * dt;
    if (jac) {
      // d v_next / dS = Dv (E_v + dt Da dacc)
      Eigen::Matrix<double, 2, Eigen::Dynamic> dv = dt * mask_a.asDiagonal() * dacc;
      dv.block<2, 2>(0, row + 2) += Matrix2d::Identity();
      dv = mask_v.asDiagonal() * dv;
      jac->state.block(row + 2, 0, 2, n) = dv;
      jac->state.block(row, 0, 2, n) = dt * dv;
      jac->state.block<2, 2>(row, row) += Matrix2d::Identity();
    }
  }
  return next;
}

}  // namespace zapp::dynamics
