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
#include <vector>

#include "zapp/error.hpp"

namespace zapp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// min f(x) s.t. h(x) > 0, lower < x < upper.
class BarrierProblem {
 public:
  virtual ~BarrierProblem() = default;
  virtual Index dimension() const = 0;
  virtual double cost(const VectorXd& x) const = 0;
  virtual VectorXd cost_gradient(const VectorXd& x) const = 0;
  virtual MatrixXd cost_hessian(const VectorXd& x) const = 0;
  virtual Index num_constraints() const = 0;
  // Fills h(x); when `jacobian` is non-null also dh/dx (num_constraints x n).
  virtual void constraints(const VectorXd& x, VectorXd& values, MatrixXd* jacobian) const = 0;
  virtual const VectorXd& lower() const = 0;
  virtual const VectorXd& upper() const = 0;
};

struct SolverOptions {
  int max_outer_iterations = 10;  // phase-1 and barrier stages together
  int max_inner_iterations = 8;   // damped Newton steps per stage
  double t0 = 1.0;
  double t0_warm = 1e3;           // first barrier weight for a strictly feasible warmstart
  double t_factor = 10.0;
  double gap_tolerance = 1e-4;    // stop once (#barrier terms) / t drops below this
  double newton_tolerance = 1e-10;
  double interior_fraction = 1e-3;
  double armijo = 1e-4;
  int max_backtracks = 40;
  double regularization = 1e-9;
};

struct SolverStats {
  int outer_iterations = 0;
  int inner_iterations = 0;
  int phase1_iterations = 0;
  bool feasible = false;
  double cost = std::numeric_limits<double>::infinity();
  double min_slack = -std::numeric_limits<double>::infinity();
  // Barrier merit after every accepted step, one list per barrier stage.
  std::vector<std::vector<double>> merit_history;
};

struct SolveOutput {
  VectorXd x;
  SolverStats stats;
};

namespace detail {

inline double min_or_inf(const VectorXd& v) {
  return v.size() == 0 ? std::numeric_limits<double>::infinity() : v.minCoeff();
}

inline VectorXd project_interior(const VectorXd& x, const VectorXd& lo, const VectorXd& hi, double frac) {
  VectorXd out = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double pad = frac * (hi(i) - lo(i));
    out(i) = std::clamp(x(i), lo(i) + pad, hi(i) - pad);
  }
  return out;
}

// Largest step <= 1 keeping x + a d strictly inside the box.
inline double box_step_limit(const VectorXd& x, const VectorXd& d, const VectorXd& lo, const VectorXd& hi) {
  double a = 1.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (d(i) > 0.0) a = std::min(a, 0.99 * (hi(i) - x(i)) / d(i));
    if (d(i) < 0.0) a = std::min(a, 0.99 * (lo(i) - x(i)) / d(i));
  }
  return a;
}

inline double box_barrier(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  return -((x - lo).array().log().sum() + (hi - x).array().log().sum());
}

// Damped Newton direction; falls back to steepest descent when the
// regularized Hessian does not give a descent direction.
inline VectorXd newton_direction(const MatrixXd& hess, const VectorXd& grad, double reg) {
  MatrixXd h = hess;
  h.diagonal().array() += reg * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  Eigen::LDLT<MatrixXd> ldlt(h);
  VectorXd d;
  if (ldlt.info() == Eigen::Success) d = ldlt.solve(-grad);
  if (d.size() != grad.size() || !d.allFinite() || grad.dot(d) >= 0.0) d = -grad;
  return d;
}

}  // namespace detail

// Log-barrier interior-point method. A phase-1 stage (minimize a shared slack
// s subject to h + s > 0) runs first when the start is not strictly
// feasible. Every stage multiplies t by t_factor; each accepted step
// satisfies an Armijo decrease of the stage merit. Returns the lowest-cost
// strictly feasible iterate when one was found. A `warm` start skips the
// early, heavily centered stages.
inline SolveOutput barrier_solve(const BarrierProblem& problem, const VectorXd& start,
                                 const SolverOptions& opt, bool warm = false) {
  const Index n = problem.dimension();
  const Index m = problem.num_constraints();
  const VectorXd& lo = problem.lower();
  const VectorXd& hi = problem.upper();
  if (start.size() != n) throw DimensionMismatch("barrier_solve", start.size(), n);

  SolveOutput out;
  VectorXd x = detail::project_interior(start, lo, hi, opt.interior_fraction);
  VectorXd h(m);
  MatrixXd jac;
  problem.constraints(x, h, nullptr);

  // phase 1
  if (detail::min_or_inf(h) <= 0.0) {
    double s = std::max(0.0, -h.minCoeff()) + 1.0;
    // The slack weight has to outweigh the pull of every log term at once.
    double t = static_cast<double>(m + 2 * n) / s;
    auto merit1 = [&](const VectorXd& xx, double ss, const VectorXd& hh) {
      const VectorXd shifted = hh.array() + ss;
      if (shifted.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
      return t * ss - shifted.array().log().sum() + detail::box_barrier(xx, lo, hi);
    };
    bool done = false;
    while (!done && out.stats.outer_iterations < opt.max_outer_iterations) {
      ++out.stats.outer_iterations;
      ++out.stats.phase1_iterations;
      for (int inner = 0; inner < opt.max_inner_iterations && !done; ++inner) {
        problem.constraints(x, h, &jac);
        const VectorXd inv = (h.array() + s).inverse();
        VectorXd grad(n + 1);
        grad.head(n) = -jac.transpose() * inv + (hi - x).cwiseInverse() - (x - lo).cwiseInverse();
        grad(n) = t - inv.sum();
        MatrixXd hess = MatrixXd::Zero(n + 1, n + 1);
        const VectorXd inv2 = inv.cwiseProduct(inv);
        hess.topLeftCorner(n, n) = jac.transpose() * inv2.asDiagonal() * jac;
        hess.topLeftCorner(n, n).diagonal() +=
            ((x - lo).cwiseInverse().cwiseAbs2() + (hi - x).cwiseInverse().cwiseAbs2());
        hess.topRightCorner(n, 1) = jac.transpose() * inv2;
        hess.bottomLeftCorner(1, n) = hess.topRightCorner(n, 1).transpose();
        hess(n, n) = inv2.sum();
        const VectorXd d = detail::newton_direction(hess, grad, opt.regularization);
        double a = detail::box_step_limit(x, d.head(n), lo, hi);
        const double phi = merit1(x, s, h);
        const double slope = grad.dot(d);
        if (-slope < opt.newton_tolerance) break;
        bool accepted = false;
        VectorXd ht(m);
        for (int bt = 0; bt < opt.max_backtracks; ++bt, a *= 0.5) {
          const VectorXd xt = x + a * d.head(n);
          const double st = s + a * d(n);
          problem.constraints(xt, ht, nullptr);
          if (!ht.allFinite()) continue;
          const double phit = merit1(xt, st, ht);
          if (phit <= phi + opt.armijo * a * slope) {
            x = xt;
            s = st;
            h = ht;
            accepted = true;
            break;
          }
        }
        ++out.stats.inner_iterations;
        if (!accepted) break;
        if (h.minCoeff() > 0.0) done = true;
      }
      t *= opt.t_factor;
    }
    if (!done) {
      out.x = x;
      out.stats.feasible = false;
      out.stats.min_slack = detail::min_or_inf(h);
      out.stats.cost = problem.cost(x);
      return out;
    }
  }

  // phase 2
  const double terms = static_cast<double>(m + 2 * n);
  double t = warm ? opt.t0_warm : opt.t0;
  VectorXd best = x;
  double best_cost = problem.cost(x);
  double best_slack = detail::min_or_inf(h);
  auto merit = [&](const VectorXd& xx, const VectorXd& hh) {
    if (hh.size() > 0 && hh.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
    return t * problem.cost(xx) - hh.array().log().sum() + detail::box_barrier(xx, lo, hi);
  };
  while (out.stats.outer_iterations < opt.max_outer_iterations) {
    ++out.stats.outer_iterations;
    std::vector<double> history;
    history.push_back(merit(x, h));
    for (int inner = 0; inner < opt.max_inner_iterations; ++inner) {
      problem.constraints(x, h, &jac);
      const VectorXd inv = h.cwiseInverse();
      const VectorXd grad = t * problem.cost_gradient(x) - jac.transpose() * inv +
                            (hi - x).cwiseInverse() - (x - lo).cwiseInverse();
      MatrixXd hess = t * problem.cost_hessian(x);
      hess.noalias() += jac.transpose() * inv.cwiseAbs2().asDiagonal() * jac;
      hess.diagonal() += (x - lo).cwiseInverse().cwiseAbs2() + (hi - x).cwiseInverse().cwiseAbs2();
      if (!grad.allFinite()) throw NumericalError("barrier_solve: non-finite barrier gradient");
      const VectorXd d = detail::newton_direction(hess, grad, opt.regularization);
      const double slope = grad.dot(d);
      if (-slope < opt.newton_tolerance) break;
      const double phi = history.back();
      double a = detail::box_step_limit(x, d, lo, hi);
      bool accepted = false;
      VectorXd ht(m);
      for (int bt = 0; bt < opt.max_backtracks; ++bt, a *= 0.5) {
        const VectorXd xt = x + a * d;
        problem.constraints(xt, ht, nullptr);
        if (!ht.allFinite()) continue;
        const double phit = merit(xt, ht);
        if (phit <= phi + opt.armijo * a * slope) {
          x = xt;
          h = ht;
          history.push_back(phit);
          accepted = true;
          break;
        }
      }
      ++out.stats.inner_iterations;
      if (!accepted) break;
      const double c = problem.cost(x);
      if (c < best_cost) {
        best = x;
        best_cost = c;
        best_slack = detail::min_or_inf(h);
      }
    }
    out.stats.merit_history.push_back(std::move(history));
    if (terms / t < opt.gap_tolerance) break;
    t *= opt.t_factor;
  }
  out.x = best;
  out.stats.feasible = true;
  out.stats.cost = best_cost;
  out.stats.min_slack = best_slack;
  return out;
}

}  // namespace zapp
