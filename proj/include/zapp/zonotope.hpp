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
#include <span>
#include <utility>
#include <vector>

#include "zapp/error.hpp"
#include "zapp/linalg.hpp"
#include "zapp/stats.hpp"

namespace zapp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

// Generators shorter than this are dropped before halfspace conversion [m].
inline constexpr double kGeneratorEpsilon = 1e-9;

// Z(c, G) = { c + G beta : ||beta||_inf <= 1 }.
class Zonotope {
 public:
  Zonotope() = default;

  Zonotope(VectorXd center, MatrixXd generators)
      : center_(std::move(center)), generators_(std::move(generators)) {
    if (generators_.rows() != center_.size()) {
      if (generators_.size() == 0) {
        generators_.resize(center_.size(), 0);
      } else {
        throw DimensionMismatch("Zonotope", center_.size(), generators_.rows());
      }
    }
  }

  static Zonotope point(VectorXd center) {
    const Index n = center.size();
    return Zonotope(std::move(center), MatrixXd(n, 0));
  }

  const VectorXd& center() const { return center_; }
  const MatrixXd& generators() const { return generators_; }
  Index dim() const { return center_.size(); }
  Index num_generators() const { return generators_.cols(); }

  // Point at factor vector beta (no bound check on beta).
  VectorXd at(const VectorXd& beta) const { return center_ + generators_ * beta; }

 private:
  VectorXd center_;
  MatrixXd generators_;
};

// { x : A x <= b } in the plane. Rows of A are unit normals.
struct HPolytope {
  Eigen::Matrix<double, Eigen::Dynamic, 2> A;
  VectorXd b;

  Index rows() const { return A.rows(); }
};

inline Zonotope minkowski_sum(const Zonotope& z1, const Zonotope& z2) {
  if (z1.dim() != z2.dim()) throw DimensionMismatch("minkowski_sum", z1.dim(), z2.dim());
  MatrixXd g(z1.dim(), z1.num_generators() + z2.num_generators());
  g << z1.generators(), z2.generators();
  return Zonotope(z1.center() + z2.center(), std::move(g));
}

inline Zonotope translate(const Zonotope& z, const VectorXd& offset) {
  if (z.dim() != offset.size()) throw DimensionMismatch("translate", z.dim(), offset.size());
  return Zonotope(z.center() + offset, z.generators());
}

inline Zonotope cartesian_product(const Zonotope& z1, const Zonotope& z2) {
  const Index n1 = z1.dim();
  const Index n2 = z2.dim();
  VectorXd c(n1 + n2);
  c << z1.center(), z2.center();
  MatrixXd g = MatrixXd::Zero(n1 + n2, z1.num_generators() + z2.num_generators());
  g.topLeftCorner(n1, z1.num_generators()) = z1.generators();
  g.bottomRightCorner(n2, z2.num_generators()) = z2.generators();
  return Zonotope(std::move(c), std::move(g));
}

// Row selection of center and generators.
inline Zonotope project(const Zonotope& z, std::span<const Index> rows) {
  VectorXd c(static_cast<Index>(rows.size()));
  MatrixXd g(static_cast<Index>(rows.size()), z.num_generators());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index src = rows[r];
    if (src < 0 || src >= z.dim()) {
      throw InvalidArgument("project: row index " + std::to_string(src) +
                            " outside dimension " + std::to_string(z.dim()));
    }
    c(static_cast<Index>(r)) = z.center()(src);
    g.row(static_cast<Index>(r)) = z.generators().row(src);
  }
  return Zonotope(std::move(c), std::move(g));
}

inline Zonotope project(const Zonotope& z, std::initializer_list<Index> rows) {
  return project(z, std::span<const Index>(rows.begin(), rows.size()));
}

// Drops generator columns shorter than eps. When nothing survives, a single
// eps * e1 column is substituted so the halfspace conversion stays posed.
inline Zonotope normalize_generators(const Zonotope& z, double eps = kGeneratorEpsilon) {
  if (!(eps > 0.0)) throw InvalidArgument("normalize_generators: eps must be > 0");
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(z.num_generators()));
  for (Index j = 0; j < z.num_generators(); ++j) {
    if (z.generators().col(j).norm() >= eps) keep.push_back(j);
  }
  if (keep.empty()) {
    MatrixXd g = MatrixXd::Zero(z.dim(), 1);
    if (z.dim() > 0) g(0, 0) = eps;
    return Zonotope(z.center(), std::move(g));
  }
  MatrixXd g(z.dim(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) g.col(static_cast<Index>(j)) = z.generators().col(keep[j]);
  return Zonotope(z.center(), std::move(g));
}

namespace detail {

// True when every column of the 2 x m matrix is parallel to the first one.
inline bool spans_single_direction(const MatrixXd& g) {
  if (g.cols() <= 1) return true;
  const Vector2d ref = g.col(0) / g.col(0).norm();
  for (Index j = 1; j < g.cols(); ++j) {
    const double cross = ref.x() * g(1, j) - ref.y() * g(0, j);
    if (std::abs(cross) > 1e-12 * g.col(j).norm()) return false;
  }
  return true;
}

}  // namespace detail

// Halfspace form of a planar zonotope. Row order: one row per generator
// column (left to right) with normal C_i / |g_i|, C = [-G(1,:); G(0,:)],
// followed by the negated block. b = A c + sum_j |A g_j|.
//
// A zonotope whose generators all lie on one line is flat, and the facet
// formula alone would describe an infinite slab; in that case a single
// perpendicular generator of length eps is appended before conversion.
inline HPolytope to_hrep(const Zonotope& z, double eps = kGeneratorEpsilon) {
  if (z.dim() != 2) throw DimensionMismatch("to_hrep", z.dim(), 2);
  if (z.num_generators() == 0) throw DegenerateGenerator(0, 0.0);
  for (Index j = 0; j < z.num_generators(); ++j) {
    const double len = z.generators().col(j).norm();
    if (!(len >= eps)) throw DegenerateGenerator(j, len);
  }
  MatrixXd g = z.generators();
  if (detail::spans_single_direction(g)) {
    const Vector2d dir = g.col(0) / g.col(0).norm();
    g.conservativeResize(2, g.cols() + 1);
    g.col(g.cols() - 1) = eps * Vector2d(-dir.y(), dir.x());
  }
  const Index m = g.cols();
  HPolytope h;
  h.A.resize(2 * m, 2);
  h.b.resize(2 * m);
  for (Index i = 0; i < m; ++i) {
    const double len = g.col(i).norm();
    const Vector2d normal(-g(1, i) / len, g(0, i) / len);
    h.A.row(i) = normal.transpose();
    h.A.row(i + m) = -normal.transpose();
  }
  const VectorXd support = (h.A * g).cwiseAbs().rowwise().sum();
  h.b = h.A * z.center() + support;
  return h;
}

// max_r (A_r x - b_r); positive iff x lies strictly outside.
inline double point_outside_margin(const HPolytope& h, const Vector2d& x) {
  return (h.A * x - h.b).maxCoeff();
}

// Row attaining point_outside_margin; ties resolve to the lowest index.
inline Index active_row(const HPolytope& h, const Vector2d& x) {
  const VectorXd r = h.A * x - h.b;
  Index best = 0;
  for (Index i = 1; i < r.size(); ++i)
    if (r(i) > r(best)) best = i;
  return best;
}

// Subgradient of point_outside_margin in x: the active row of A.
inline Vector2d point_outside_margin_gradient(const HPolytope& h, const Vector2d& x) {
  return h.A.row(active_row(h, x)).transpose();
}

inline bool contains(const HPolytope& h, const Vector2d& x, double tol = 1e-9) {
  return point_outside_margin(h, x) <= tol;
}

// Z(c2, [G1, G2]): z1 and z2 are disjoint iff c1 is not in this set.
inline Zonotope collision_zonotope(const Zonotope& z1, const Zonotope& z2) {
  if (z1.dim() != z2.dim()) throw DimensionMismatch("collision_zonotope", z1.dim(), z2.dim());
  MatrixXd g(z1.dim(), z1.num_generators() + z2.num_generators());
  g << z1.generators(), z2.generators();
  return Zonotope(z2.center(), std::move(g));
}

// Planar intersection test through the center-containment criterion.
inline bool intersects(const Zonotope& z1, const Zonotope& z2, double eps = kGeneratorEpsilon) {
  const HPolytope h = to_hrep(normalize_generators(collision_zonotope(z1, z2), eps), eps);
  return point_outside_margin(h, z1.center()) <= 0.0;
}

// Zonotope whose generators are the scaled principal axes of the Gaussian
// N(mu, sigma): eps * [sqrt(l_1) v_1, ..., sqrt(l_n) v_n] with
// eps = sqrt(chi2inv_n(erf(alpha / sqrt 2))). Contains the eps-level ellipsoid.
inline Zonotope confidence_zonotope(const VectorXd& mu, const MatrixXd& sigma, double alpha) {
  const Index n = mu.size();
  if (sigma.rows() != n || sigma.cols() != n) {
    throw DimensionMismatch("confidence_zonotope", n, sigma.rows());
  }
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw InvalidArgument("confidence_zonotope: covariance is not symmetric");
  }
  const double scale = stats::confidence_scale(alpha, static_cast<int>(n));
  const linalg::SymmetricEigen eig = linalg::jacobi_eigen(sigma);
  MatrixXd g(n, n);
  for (Index j = 0; j < n; ++j) {
    double lambda = eig.values(j);
    if (lambda < -1e-10) {
      throw InvalidArgument("confidence_zonotope: covariance has eigenvalue " +
                            std::to_string(lambda));
    }
    lambda = std::max(lambda, 0.0);
    g.col(j) = scale * std::sqrt(lambda) * eig.vectors.col(j);
  }
  return Zonotope(mu, std::move(g));
}

// Same construction with a precomputed confidence scale.
inline Zonotope confidence_zonotope_scaled(const VectorXd& mu, const MatrixXd& sigma, double scale) {
  const Index n = mu.size();
  const linalg::SymmetricEigen eig = linalg::jacobi_eigen(sigma);
  MatrixXd g(n, n);
  for (Index j = 0; j < n; ++j) {
    const double lambda = eig.values(j);
    if (lambda < -1e-10) {
      throw InvalidArgument("confidence_zonotope: covariance has eigenvalue " +
                            std::to_string(lambda));
    }
    g.col(j) = scale * std::sqrt(std::max(lambda, 0.0)) * eig.vectors.col(j);
  }
  return Zonotope(mu, std::move(g));
}

}  // namespace zapp
