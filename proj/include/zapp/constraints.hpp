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
#include <string>
#include <vector>

#include "zapp/error.hpp"
#include "zapp/zonotope.hpp"

namespace zapp {

// Planar point that is affine in the decision vector: value + jac * x.
// An empty jacobian marks a constant.
struct AffineVec2 {
  Vector2d value = Vector2d::Zero();
  MatrixXd jac;

  AffineVec2() = default;
  explicit AffineVec2(const Vector2d& v) : value(v) {}
  AffineVec2(const Vector2d& v, MatrixXd j) : value(v), jac(std::move(j)) {}

  bool is_constant() const { return jac.size() == 0; }

  Vector2d at(const VectorXd& x) const {
    if (is_constant() || x.size() == 0) return value;
    return value + jac * x;
  }

  friend AffineVec2 operator+(const AffineVec2& a, const AffineVec2& b) {
    return AffineVec2(a.value + b.value, combine(a.jac, 1.0, b.jac, 1.0));
  }
  friend AffineVec2 operator-(const AffineVec2& a, const AffineVec2& b) {
    return AffineVec2(a.value - b.value, combine(a.jac, 1.0, b.jac, -1.0));
  }
  friend AffineVec2 operator*(double s, const AffineVec2& a) {
    return AffineVec2(s * a.value, a.is_constant() ? MatrixXd() : MatrixXd(s * a.jac));
  }

 private:
  static MatrixXd combine(const MatrixXd& a, double sa, const MatrixXd& b, double sb) {
    if (a.size() == 0 && b.size() == 0) return {};
    if (a.size() == 0) return sb * b;
    if (b.size() == 0) return sa * a;
    return sa * a + sb * b;
  }
};

// Position-space zonotope whose center and generators may move with the
// decision vector.
struct PlanarPiece {
  AffineVec2 center;
  std::vector<AffineVec2> generators;

  Zonotope at(const VectorXd& x) const {
    MatrixXd g(2, static_cast<Index>(generators.size()));
    for (std::size_t j = 0; j < generators.size(); ++j) g.col(static_cast<Index>(j)) = generators[j].at(x);
    return Zonotope(center.at(x), std::move(g));
  }

  static PlanarPiece constant(const Zonotope& z) {
    if (z.dim() != 2) throw DimensionMismatch("PlanarPiece", z.dim(), 2);
    PlanarPiece p;
    p.center = AffineVec2(z.center());
    for (Index j = 0; j < z.num_generators(); ++j) p.generators.emplace_back(z.generators().col(j));
    return p;
  }
};

enum class ConstraintKind { kDynamic, kStatic };
enum class UnionPiece { kA, kB, kDiscrete };

inline const char* to_string(ConstraintKind k) { return k == ConstraintKind::kDynamic ? "dynamic" : "static"; }
inline const char* to_string(UnionPiece p) {
  switch (p) {
    case UnionPiece::kA: return "a";
    case UnionPiece::kB: return "b";
    default: return "discrete";
  }
}

// g(x) = max(A(x) p_e(x) - b(x)) for the collision zonotope
// P = Z(c_other, [G_ego, G_other]); feasible when g >= margin.
struct ConstraintRecord {
  ConstraintKind kind = ConstraintKind::kDynamic;
  int mode = 0;
  int interval = 0;
  int counterpart = 0;  // agent slot or obstacle index
  UnionPiece piece = UnionPiece::kDiscrete;
  PlanarPiece ego;
  PlanarPiece other;
  HPolytope hpoly;  // at the assembly point x = 0
  double margin = 0.05;

  std::string describe() const {
    return std::string(to_string(kind)) + " constraint (mode " + std::to_string(mode) + ", interval " +
           std::to_string(interval) + ", counterpart " + std::to_string(counterpart) + ", piece " +
           to_string(piece) + ")";
  }
};

namespace detail {

// Surviving generator columns of P with their sources.
struct CollisionGeometry {
  Vector2d ego_center;
  const MatrixXd* ego_center_jac = nullptr;
  Vector2d center;
  const MatrixXd* center_jac = nullptr;
  MatrixXd generators;                       // 2 x m, as passed to to_hrep
  std::vector<const MatrixXd*> generator_jacs;  // nullptr = constant
};

inline CollisionGeometry collision_geometry(const ConstraintRecord& rec, const VectorXd& x) {
  CollisionGeometry geo;
  geo.ego_center = rec.ego.center.at(x);
  geo.ego_center_jac = rec.ego.center.is_constant() ? nullptr : &rec.ego.center.jac;
  geo.center = rec.other.center.at(x);
  geo.center_jac = rec.other.center.is_constant() ? nullptr : &rec.other.center.jac;

  std::vector<Vector2d> cols;
  cols.reserve(rec.ego.generators.size() + rec.other.generators.size());
  auto add = [&](const std::vector<AffineVec2>& gens) {
    for (const auto& g : gens) {
      const Vector2d v = g.at(x);
      if (v.norm() < kGeneratorEpsilon) continue;
      cols.push_back(v);
      geo.generator_jacs.push_back(g.is_constant() ? nullptr : &g.jac);
    }
  };
  add(rec.ego.generators);
  add(rec.other.generators);
  if (cols.empty()) {
    cols.emplace_back(kGeneratorEpsilon, 0.0);
    geo.generator_jacs.push_back(nullptr);
  }
  geo.generators.resize(2, static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) geo.generators.col(static_cast<Index>(j)) = cols[j];
  return geo;
}

inline void accumulate(VectorXd& grad, const Eigen::RowVector2d& coeff, const MatrixXd* jac) {
  if (jac) grad.noalias() += (coeff * *jac).transpose();
}

}  // namespace detail

inline ConstraintRecord make_record(ConstraintKind kind, PlanarPiece ego, PlanarPiece other, double margin) {
  ConstraintRecord rec;
  rec.kind = kind;
  rec.ego = std::move(ego);
  rec.other = std::move(other);
  rec.margin = margin;
  if (!(margin >= 0.0)) throw InvalidArgument("constraint margin must be >= 0");
  const auto geo = detail::collision_geometry(rec, VectorXd());
  rec.hpoly = to_hrep(Zonotope(geo.center, geo.generators));
  return rec;
}

// Ego piece versus one agent piece; P = Z(p_i, [pos(G_e), pos(G_i)]).
inline ConstraintRecord dynamic_constraint(PlanarPiece ego, PlanarPiece agent, double margin) {
  return make_record(ConstraintKind::kDynamic, std::move(ego), std::move(agent), margin);
}

// Ego piece versus a static obstacle zonotope.
inline ConstraintRecord static_constraint(PlanarPiece ego, const Zonotope& obstacle, double margin) {
  return make_record(ConstraintKind::kStatic, std::move(ego), PlanarPiece::constant(obstacle), margin);
}

struct ConstraintValue {
  double g = 0.0;
  Index active_row = 0;
};

inline HPolytope record_hpoly(const ConstraintRecord& rec, const VectorXd& x) {
  const auto geo = detail::collision_geometry(rec, x);
  return to_hrep(Zonotope(geo.center, geo.generators));
}

inline ConstraintValue evaluate(const ConstraintRecord& rec, const VectorXd& x) {
  const auto geo = detail::collision_geometry(rec, x);
  const HPolytope h = to_hrep(Zonotope(geo.center, geo.generators));
  const VectorXd rows = h.A * geo.ego_center - h.b;
  ConstraintValue out{rows(0), 0};
  for (Index i = 1; i < rows.size(); ++i) {
    if (rows(i) > out.g) out = {rows(i), i};
  }
  return out;
}

// Log-sum-exp smoothing of the row max, (1/T) log sum exp(T r_i).
inline double evaluate_smooth(const ConstraintRecord& rec, const VectorXd& x, double temperature) {
  const auto geo = detail::collision_geometry(rec, x);
  const HPolytope h = to_hrep(Zonotope(geo.center, geo.generators));
  const VectorXd rows = h.A * geo.ego_center - h.b;
  const double top = rows.maxCoeff();
  return top + std::log((temperature * (rows.array() - top)).exp().sum()) / temperature;
}

namespace detail {

// d row_i / dx for row i of P's halfspace form evaluated at the ego center.
// Row value: n . (p_e - c) - sum_{j != col} |n . g_j| with
// n = s R g_col / |g_col|, R = rot(+90 deg).
inline VectorXd row_gradient(const CollisionGeometry& geo, Index row, Index dim) {
  VectorXd grad = VectorXd::Zero(dim);
  const Index m = geo.generators.cols();
  const Index col = row % m;
  const double sign = row < m ? 1.0 : -1.0;
  const Vector2d g_col = geo.generators.col(col);
  const double len = g_col.norm();
  const Vector2d rot(-g_col.y(), g_col.x());
  const Vector2d n = sign * rot / len;

  detail::accumulate(grad, n.transpose(), geo.ego_center_jac);
  detail::accumulate(grad, -n.transpose(), geo.center_jac);

  Vector2d w = geo.ego_center - geo.center;
  for (Index j = 0; j < m; ++j) {
    if (j == col) continue;
    const Vector2d gj = geo.generators.col(j);
    const double proj = n.dot(gj);
    const double sgn = proj > 0.0 ? 1.0 : (proj < 0.0 ? -1.0 : 0.0);
    w -= sgn * gj;
    detail::accumulate(grad, -sgn * n.transpose(), geo.generator_jacs[static_cast<std::size_t>(j)]);
  }
  if (const MatrixXd* jc = geo.generator_jacs[static_cast<std::size_t>(col)]) {
    const Vector2d ghat = g_col / len;
    Eigen::Matrix2d rot90;
    rot90 << 0.0, -1.0, 1.0, 0.0;
    const Eigen::Matrix2d dn = sign * rot90 * (Eigen::Matrix2d::Identity() - ghat * ghat.transpose()) / len;
    detail::accumulate(grad, w.transpose() * dn, jc);
  }
  return grad;
}

}  // namespace detail

// Subgradient of g with respect to the decision vector (active row, ties to
// the lowest index). Generator lengths from the covariance are constants; only
// mean-dependent centers and segment generators move.
inline VectorXd constraint_gradient(const ConstraintRecord& rec, const VectorXd& x, Index dim) {
  const auto geo = detail::collision_geometry(rec, x);
  const Zonotope p(geo.center, geo.generators);
  const HPolytope h = to_hrep(p);
  const Index row = active_row(h, geo.ego_center);
  const Index m = geo.generators.cols();
  if (h.rows() != 2 * m) {
    // Flat P: to_hrep appended a constant perpendicular column.
    detail::CollisionGeometry padded = geo;
    const Vector2d dir = geo.generators.col(0).normalized();
    padded.generators.conservativeResize(2, m + 1);
    padded.generators.col(m) = kGeneratorEpsilon * Vector2d(-dir.y(), dir.x());
    padded.generator_jacs.push_back(nullptr);
    return detail::row_gradient(padded, row, dim);
  }
  return detail::row_gradient(geo, row, dim);
}

inline VectorXd constraint_gradient_smooth(const ConstraintRecord& rec, const VectorXd& x, Index dim,
                                           double temperature) {
  auto geo = detail::collision_geometry(rec, x);
  const HPolytope h = to_hrep(Zonotope(geo.center, geo.generators));
  const Index m = geo.generators.cols();
  if (h.rows() != 2 * m) {
    const Vector2d dir = geo.generators.col(0).normalized();
    geo.generators.conservativeResize(2, m + 1);
    geo.generators.col(m) = kGeneratorEpsilon * Vector2d(-dir.y(), dir.x());
    geo.generator_jacs.push_back(nullptr);
  }
  const VectorXd rows = h.A * geo.ego_center - h.b;
  const VectorXd w = (temperature * (rows.array() - rows.maxCoeff())).exp();
  const double total = w.sum();
  VectorXd grad = VectorXd::Zero(dim);
  for (Index i = 0; i < rows.size(); ++i) {
    if (w(i) / total < 1e-14) continue;
    grad += (w(i) / total) * detail::row_gradient(geo, i, dim);
  }
  return grad;
}

}  // namespace zapp
