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

// Reference computations for tests and the self-test. Nothing here calls the
// halfspace conversion or the collision test it is meant to check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "zapp/zonotope.hpp"

namespace zapp::oracle {

using Polygon = std::vector<Vector2d>;  // counter-clockwise vertices

// Vertices of a 2-D zonotope: orient generators into the upper half plane,
// sort by angle, walk the boundary.
inline Polygon zonotope_polygon(const Vector2d& c, const MatrixXd& g) {
  std::vector<Vector2d> gens;
  for (Index j = 0; j < g.cols(); ++j) {
    Vector2d v = g.col(j);
    if (v.norm() < 1e-14) continue;
    if (v.y() < 0.0 || (v.y() == 0.0 && v.x() < 0.0)) v = -v;
    gens.push_back(v);
  }
  if (gens.empty()) return {c};
  std::sort(gens.begin(), gens.end(),
            [](const Vector2d& a, const Vector2d& b) { return std::atan2(a.y(), a.x()) < std::atan2(b.y(), b.x()); });
  Vector2d p = c;
  for (const auto& v : gens) p -= v;
  Polygon poly;
  for (const auto& v : gens) {
    poly.push_back(p);
    p += 2.0 * v;
  }
  for (const auto& v : gens) {
    poly.push_back(p);
    p -= 2.0 * v;
  }
  return poly;
}

inline Polygon zonotope_polygon(const Zonotope& z) { return zonotope_polygon(z.center(), z.generators()); }

inline double cross(const Vector2d& a, const Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

inline bool inside_polygon(const Polygon& poly, const Vector2d& p, double tol = 1e-12) {
  if (poly.size() < 3) return poly.size() == 1 && (poly[0] - p).norm() <= tol;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vector2d& a = poly[i];
    const Vector2d& b = poly[(i + 1) % poly.size()];
    const Vector2d e = b - a;
    if (e.norm() < 1e-15) continue;
    if (cross(e, p - a) / e.norm() < -tol) return false;
  }
  return true;
}

// x-extent of a convex polygon on the horizontal line y.
inline std::optional<std::pair<double, double>> row_span(const Polygon& poly, double y) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vector2d& a = poly[i];
    const Vector2d& b = poly[(i + 1) % n];
    if ((a.y() - y) * (b.y() - y) > 0.0) continue;
    if (a.y() == b.y()) {
      if (a.y() != y) continue;
      lo = std::min({lo, a.x(), b.x()});
      hi = std::max({hi, a.x(), b.x()});
      continue;
    }
    const double t = (y - a.y()) / (b.y() - a.y());
    const double x = a.x() + t * (b.x() - a.x());
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (lo > hi) return std::nullopt;
  return std::make_pair(lo, hi);
}

struct Bounds {
  Vector2d lo;
  Vector2d hi;
};

inline Bounds bounds(const Polygon& poly) {
  Bounds b{poly.front(), poly.front()};
  for (const auto& p : poly) {
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  return b;
}

// x-extent of a convex polygon inside the horizontal strip [y0, y1].
inline std::optional<std::pair<double, double>> strip_span(const Polygon& poly, double y0, double y1) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double y : {y0, y1}) {
    if (const auto s = row_span(poly, y)) {
      lo = std::min(lo, s->first);
      hi = std::max(hi, s->second);
    }
  }
  for (const auto& v : poly) {
    if (v.y() >= y0 && v.y() <= y1) {
      lo = std::min(lo, v.x());
      hi = std::max(hi, v.x());
    }
  }
  if (lo > hi) return std::nullopt;
  return std::make_pair(lo, hi);
}

// Overlap verdict on a workspace raster with cell size `res`: a cell is
// occupied by a set when the set touches the closed cell; the sets overlap
// when some cell is occupied by both. Flat sets (segments, points) occupy
// the cells they pass through.
inline bool grid_overlap(const Polygon& a, const Polygon& b, double res = 0.01) {
  const Bounds ba = bounds(a);
  const Bounds bb = bounds(b);
  const Vector2d lo = ba.lo.cwiseMax(bb.lo);
  const Vector2d hi = ba.hi.cwiseMin(bb.hi);
  if ((lo.array() > hi.array() + res).any()) return false;
  const auto j0 = static_cast<long long>(std::floor(lo.y() / res)) - 1;
  const auto j1 = static_cast<long long>(std::floor(hi.y() / res)) + 1;
  for (long long j = j0; j <= j1; ++j) {
    const double y0 = static_cast<double>(j) * res;
    const double y1 = y0 + res;
    const auto sa = strip_span(a, y0, y1);
    const auto sb = strip_span(b, y0, y1);
    if (!sa || !sb) continue;
    const auto a0 = static_cast<long long>(std::floor(sa->first / res));
    const auto a1 = static_cast<long long>(std::floor(sa->second / res));
    const auto b0 = static_cast<long long>(std::floor(sb->first / res));
    const auto b1 = static_cast<long long>(std::floor(sb->second / res));
    if (std::max(a0, b0) <= std::min(a1, b1)) return true;
  }
  return false;
}

inline bool grid_overlap(const Zonotope& a, const Zonotope& b, double res = 0.01) {
  return grid_overlap(zonotope_polygon(a), zonotope_polygon(b), res);
}

// Exact separation distance of two convex polygons is not needed; the signed
// gap along the best separating edge normal is enough to flag near-contact.
inline double separation(const Polygon& a, const Polygon& b) {
  double best = -std::numeric_limits<double>::infinity();
  auto scan = [&](const Polygon& p, const Polygon& q) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Vector2d e = p[(i + 1) % p.size()] - p[i];
      if (e.norm() < 1e-15) continue;
      const Vector2d n(e.y() / e.norm(), -e.x() / e.norm());  // outward for CCW
      double pmax = -std::numeric_limits<double>::infinity();
      for (const auto& v : p) pmax = std::max(pmax, n.dot(v));
      double qmin = std::numeric_limits<double>::infinity();
      for (const auto& v : q) qmin = std::min(qmin, n.dot(v));
      best = std::max(best, qmin - pmax);
    }
  };
  scan(a, b);
  scan(b, a);
  return best;
}

template <class Rng>
Zonotope random_zonotope(Rng& rng, int max_generators = 6, double center_box = 5.0, double min_len = 0.05,
                         double max_len = 1.5) {
  std::uniform_int_distribution<int> count(1, max_generators);
  std::uniform_real_distribution<double> cen(-center_box, center_box);
  std::uniform_real_distribution<double> len(min_len, max_len);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  const int m = count(rng);
  MatrixXd g(2, m);
  for (int j = 0; j < m; ++j) {
    const double a = ang(rng);
    g.col(j) = len(rng) * Vector2d(std::cos(a), std::sin(a));
  }
  return Zonotope(Vector2d(cen(rng), cen(rng)), g);
}

template <class Rng>
VectorXd sample_in_zonotope(const Zonotope& z, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorXd beta(z.num_generators());
  for (Index j = 0; j < beta.size(); ++j) beta(j) = u(rng);
  return z.center() + z.generators() * beta;
}

// Point on the segment between a sample of `zk` and a sample of `zk1`.
template <class Rng>
VectorXd interpolated_motion_sample(const Zonotope& zk, const Zonotope& zk1, Rng& rng) {
  std::uniform_real_distribution<double> s01(0.0, 1.0);
  const VectorXd a = sample_in_zonotope(zk, rng);
  const VectorXd b = sample_in_zonotope(zk1, rng);
  const double s = s01(rng);
  return (1.0 - s) * a + s * b;
}

inline VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                                   double h = 1e-6) {
  VectorXd g(x.size());
  VectorXd xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    xp(i) = xi + h;
    const double fp = f(xp);
    xp(i) = xi - h;
    const double fm = f(xp);
    xp(i) = xi;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Max-norm error relative to max(|exact|, floor). The floor sits above the
// central-difference roundoff ulp(f) / 2h (about 2e-10 for |f| ~ 1, h = 1e-6)
// divided by the tolerances in use, so an exactly zero gradient is not
// reported as a 100% error.
inline double relative_error(const VectorXd& approx, const VectorXd& exact, double floor = 1e-5) {
  if (approx.size() != exact.size()) return std::numeric_limits<double>::infinity();
  if (exact.size() == 0) return 0.0;
  return (approx - exact).cwiseAbs().maxCoeff() / std::max(exact.cwiseAbs().maxCoeff(), floor);
}

}  // namespace zapp::oracle
