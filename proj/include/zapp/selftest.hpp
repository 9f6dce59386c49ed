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

// Oracle-backed checks shared by the command-line self-test and the
// acceptance suite.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "zapp/constraints.hpp"
#include "zapp/planner.hpp"
#include "zapp/reachset.hpp"
#include "zapp/simulator.hpp"
#include "zapp/testing/oracles.hpp"
#include "zapp/zonotope.hpp"

namespace zapp::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Prop.-1 verdicts against the raster overlap oracle.
struct CollisionReport {
  int pairs = 0;
  int colliding = 0;
  int disagreements = 0;
  double closest_contact = std::numeric_limits<double>::infinity();  // min |separation|
};

inline CollisionReport collision_oracle(std::uint64_t seed, int pairs, double res = 0.01) {
  std::mt19937_64 rng(seed);
  CollisionReport r;
  for (int i = 0; i < pairs; ++i) {
    const Zonotope a = oracle::random_zonotope(rng);
    const Zonotope b = oracle::random_zonotope(rng);
    const bool fast = intersects(a, b);
    const bool slow = oracle::grid_overlap(a, b, res);
    ++r.pairs;
    r.colliding += fast ? 1 : 0;
    r.disagreements += fast != slow ? 1 : 0;
    r.closest_contact = std::min(r.closest_contact, std::abs(oracle::separation(oracle::zonotope_polygon(a),
                                                                                oracle::zonotope_polygon(b))));
  }
  return r;
}

// Interior samples must satisfy the halfspaces; points pushed just past each
// facet must violate them.
struct HrepReport {
  int zonotopes = 0;
  int interior_samples = 0;
  int interior_failures = 0;
  int exterior_points = 0;
  int exterior_failures = 0;
  double worst_interior = -std::numeric_limits<double>::infinity();
};

inline HrepReport hrep_check(std::uint64_t seed, int count, int samples, double push = 1e-6) {
  std::mt19937_64 rng(seed);
  HrepReport r;
  for (int i = 0; i < count; ++i) {
    const Zonotope z = oracle::random_zonotope(rng);
    const HPolytope h = to_hrep(z);
    ++r.zonotopes;
    for (int s = 0; s < samples; ++s) {
      const Vector2d x = oracle::sample_in_zonotope(z, rng);
      const double v = point_outside_margin(h, x);
      r.worst_interior = std::max(r.worst_interior, v);
      ++r.interior_samples;
      if (v > 1e-9) ++r.interior_failures;
    }
    // facet midpoints from the independent vertex walk, pushed outward
    const oracle::Polygon poly = oracle::zonotope_polygon(z);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Vector2d a = poly[k];
      const Vector2d b = poly[(k + 1) % poly.size()];
      const Vector2d e = b - a;
      if (e.norm() < 1e-9) continue;
      const Vector2d n(e.y() / e.norm(), -e.x() / e.norm());
      const Vector2d out = 0.5 * (a + b) + push * n;
      ++r.exterior_points;
      if (point_outside_margin(h, out) <= 0.0) ++r.exterior_failures;
    }
  }
  return r;
}

using RecordGradient = std::function<VectorXd(const ConstraintRecord&, const VectorXd&, Index)>;

inline VectorXd default_record_gradient(const ConstraintRecord& rec, const VectorXd& x, Index dim) {
  return constraint_gradient(rec, x, dim);
}

// True when g is smooth around x: unique active row and no |n . g_j| kink.
inline bool away_from_ties(const ConstraintRecord& rec, const VectorXd& x, double gap = 1e-6) {
  const HPolytope h = record_hpoly(rec, x);
  const Zonotope ego = rec.ego.at(x);
  const VectorXd rows = h.A * ego.center() - h.b;
  Index best = 0;
  rows.maxCoeff(&best);
  // Row i comes from generator i mod nG. Parallel constant generators give
  // rows that coincide for every x, which is not a kink.
  const auto geo = detail::collision_geometry(rec, x);
  const Index ng = static_cast<Index>(geo.generator_jacs.size());
  auto constant_row = [&](Index i) { return geo.generator_jacs[static_cast<std::size_t>(i % ng)] == nullptr; };
  for (Index i = 0; i < rows.size(); ++i) {
    if (i == best || rows(best) - rows(i) >= gap) continue;
    const bool duplicate = constant_row(i) && constant_row(best) && (h.A.row(i) - h.A.row(best)).norm() < 1e-12 &&
                           std::abs(h.b(i) - h.b(best)) < 1e-12;
    if (!duplicate) return false;
  }
  const Zonotope p = collision_zonotope(ego, rec.other.at(x));
  const Vector2d n = h.A.row(best).transpose();
  for (Index j = 0; j < p.num_generators(); ++j) {
    const double proj = std::abs(n.dot(p.generators().col(j)));
    if (proj > 0.0 && proj < gap) return false;
  }
  return true;
}

struct GradientReport {
  int problems = 0;
  int records_checked = 0;
  int records_skipped = 0;
  double worst_constraint = 0.0;
  double worst_cost = 0.0;
};

template <class Rng>
AffineVec2 random_affine(Rng& rng, Index dim, double scale) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector2d v(nd(rng), nd(rng));
  MatrixXd j(2, dim);
  for (Index c = 0; c < dim; ++c) j.col(c) = scale * Vector2d(nd(rng), nd(rng));
  return AffineVec2(v, j);
}

// Synthetic records whose centers and some generators move with x.
template <class Rng>
ConstraintRecord random_record(Rng& rng, Index dim) {
  std::uniform_real_distribution<double> len(0.1, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  std::uniform_int_distribution<int> count(1, 4);
  auto fixed = [&] {
    const double a = ang(rng);
    return AffineVec2(len(rng) * Vector2d(std::cos(a), std::sin(a)));
  };
  PlanarPiece ego;
  ego.center = random_affine(rng, dim, 0.3);
  ego.center.value *= 3.0;
  for (int j = count(rng); j > 0; --j) ego.generators.push_back(fixed());
  ego.generators.push_back(random_affine(rng, dim, 0.05));
  PlanarPiece other;
  other.center = random_affine(rng, dim, 0.3);
  for (int j = count(rng); j > 0; --j) other.generators.push_back(fixed());
  other.generators.push_back(random_affine(rng, dim, 0.05));
  return dynamic_constraint(ego, other, 0.05);
}

inline GradientReport gradient_check_synthetic(std::uint64_t seed, int problems, int records_per_problem,
                                               const RecordGradient& grad = default_record_gradient) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  GradientReport r;
  const Index dim = 12;
  for (int p = 0; p < problems; ++p) {
    ++r.problems;
    for (int k = 0; k < records_per_problem; ++k) {
      const ConstraintRecord rec = random_record(rng, dim);
      VectorXd x(dim);
      for (Index i = 0; i < dim; ++i) x(i) = nd(rng);
      if (!away_from_ties(rec, x)) {
        ++r.records_skipped;
        continue;
      }
      const VectorXd fd = oracle::central_difference([&](const VectorXd& xx) { return evaluate(rec, xx).g; }, x);
      r.worst_constraint = std::max(r.worst_constraint, oracle::relative_error(grad(rec, x, dim), fd));
      ++r.records_checked;
    }
  }
  return r;
}

// Records and cost of assembled planning problems on random hallway scenes.
inline GradientReport gradient_check_planning(std::uint64_t seed, int problems, int records_per_problem,
                                              const RecordGradient& grad = default_record_gradient) {
  std::mt19937_64 rng(seed);
  GradientReport r;
  PlannerConfig cfg;
  for (int p = 0; p < problems; ++p) {
    const sim::Scene scene = sim::generate_scene(rng());
    SocialForcePredictor predictor(PredictorConfig{}, sim::wall_boxes(scene.walls));
    dynamics::World now = sim::initial_world(scene);
    std::uniform_real_distribution<double> shift(0.0, 20.0);
    std::uniform_real_distribution<double> lat(-2.0, 2.0);
    std::uniform_real_distribution<double> vel(0.0, 3.5);
    now.ego << shift(rng), lat(rng), vel(rng), 0.0;
    bool clear = true;
    for (const auto& a : now.agents) clear = clear && (a.head<2>() - now.ego.head<2>()).norm() > 1.0;
    if (!clear) now.ego.y() = 0.5 * now.ego.y();
    const StateHistory history{cfg.dt, {now}};
    const ControlSequence nominal = nominal_controls(now.ego, scene.goal, cfg);
    cfg.variant = p % 2 == 0 ? Variant::kZapp : Variant::kDiscreteBaseline;
    const auto preds = predictor.predict(history, nominal, cfg.horizon, cfg.mode_count);
    const PlanningProblem prob = assemble_problem(preds, nominal, now, scene.goal, scene.walls, cfg);
    ++r.problems;

    std::uniform_real_distribution<double> unit(0.05, 0.95);
    VectorXd x(prob.dimension());
    for (Index i = 0; i < x.size(); ++i) x(i) = prob.lo(i) + unit(rng) * (prob.hi(i) - prob.lo(i));

    const VectorXd cost_fd = oracle::central_difference([&](const VectorXd& xx) { return prob.cost(xx); }, x, 1e-5);
    r.worst_cost = std::max(r.worst_cost, oracle::relative_error(prob.cost_gradient(x), cost_fd));

    std::vector<std::size_t> pick(prob.records.size());
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    std::shuffle(pick.begin(), pick.end(), rng);
    if (static_cast<int>(pick.size()) > records_per_problem) pick.resize(static_cast<std::size_t>(records_per_problem));
    for (std::size_t idx : pick) {
      const ConstraintRecord& rec = prob.records[idx];
      if (!away_from_ties(rec, x)) {
        ++r.records_skipped;
        continue;
      }
      const VectorXd fd = oracle::central_difference([&](const VectorXd& xx) { return evaluate(rec, xx).g; }, x);
      r.worst_constraint = std::max(r.worst_constraint, oracle::relative_error(grad(rec, x, prob.dimension()), fd));
      ++r.records_checked;
    }
  }
  return r;
}

// Gaussian samples inside the alpha-level confidence zonotope.
struct ContainmentReport {
  int samples = 0;
  double rate = 0.0;
  double required = 0.0;
};

inline ContainmentReport containment_check(std::uint64_t seed, int samples, double alpha = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::Matrix2d l;
  l << 0.8, 0.0, 0.5, 0.3;
  const Eigen::Matrix2d sigma = l * l.transpose();
  const Vector2d mu(1.0, -2.0);
  const HPolytope h = to_hrep(confidence_zonotope(mu, sigma, alpha));
  int inside = 0;
  for (int i = 0; i < samples; ++i) {
    const Vector2d x = mu + l * Vector2d(nd(rng), nd(rng));
    if (contains(h, x)) ++inside;
  }
  return {samples, static_cast<double>(inside) / samples, std::erf(alpha / std::sqrt(2.0))};
}

// Interpolated-motion samples inside the two continuous-time pieces, on
// position projections of predicted agent sets.
struct CoverageReport {
  int instances = 0;
  int samples_per_instance = 0;
  double worst_rate = 1.0;
  double mean_rate = 0.0;
  std::vector<double> rates;
};

inline CoverageReport coverage_check(std::uint64_t seed, int instances, int samples) {
  std::mt19937_64 rng(seed);
  CoverageReport r;
  r.samples_per_instance = samples;
  PlannerConfig cfg;
  for (int inst = 0; inst < instances; ++inst) {
    const sim::Scene scene = sim::generate_scene(rng());
    SocialForcePredictor predictor(PredictorConfig{}, sim::wall_boxes(scene.walls));
    const StateHistory history{cfg.dt, {sim::initial_world(scene)}};
    const auto preds = predictor.predict(history, nominal_controls(scene.ego_start, scene.goal, cfg), cfg.horizon, 1);
    const DiscreteReachSet dr = discrete_reach(preds.front(), cfg.alpha);
    const ContinuousReachSet cr = continuous_reach(dr);
    std::uniform_int_distribution<int> slot_pick(1, static_cast<int>(scene.agents.size()));
    std::uniform_int_distribution<int> interval_pick(0, cfg.horizon - 1);
    const auto slot = static_cast<std::size_t>(slot_pick(rng));
    const auto k = static_cast<std::size_t>(interval_pick(rng));
    const Zonotope zk = project(dr.sets[slot][k], {0, 1});
    const Zonotope zk1 = project(dr.sets[slot][k + 1], {0, 1});
    const HPolytope a = to_hrep(normalize_generators(project(cr.pieces[slot][k].a, {0, 1})));
    const HPolytope b = to_hrep(normalize_generators(project(cr.pieces[slot][k].b, {0, 1})));
    int inside = 0;
    for (int s = 0; s < samples; ++s) {
      const Vector2d x = oracle::interpolated_motion_sample(zk, zk1, rng);
      if (contains(a, x) || contains(b, x)) ++inside;
    }
    const double rate = static_cast<double>(inside) / samples;
    r.rates.push_back(rate);
    r.worst_rate = std::min(r.worst_rate, rate);
    r.mean_rate += rate / instances;
    ++r.instances;
  }
  return r;
}

// Command-line self-test. With `inject_gradient_fault` the analytic record
// gradient is perturbed so the finite-difference suite must fail.
inline std::vector<CheckResult> run_selftest(bool inject_gradient_fault = false) {
  std::vector<CheckResult> out;
  auto timed = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult c;
    c.name = name;
    try {
      std::tie(c.passed, c.detail) = fn();
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(c));
  };

  timed("grid collision oracle", [] {
    const auto r = collision_oracle(11, 100);
    std::ostringstream d;
    d << r.disagreements << " disagreements over " << r.pairs << " pairs (" << r.colliding << " colliding)";
    return std::make_pair(r.disagreements == 0, d.str());
  });
  timed("halfspace membership", [] {
    const auto r = hrep_check(12, 100, 1000);
    std::ostringstream d;
    d << r.interior_failures << " interior and " << r.exterior_failures << " exterior failures";
    return std::make_pair(r.interior_failures == 0 && r.exterior_failures == 0, d.str());
  });
  timed("finite-difference gradients", [&] {
    RecordGradient grad = default_record_gradient;
    if (inject_gradient_fault) {
      grad = [](const ConstraintRecord& rec, const VectorXd& x, Index dim) {
        VectorXd g = constraint_gradient(rec, x, dim);
        g(0) += 1e-2 * std::max(1.0, g.cwiseAbs().maxCoeff());
        return g;
      };
    }
    const auto r = gradient_check_synthetic(13, 50, 20, grad);
    std::ostringstream d;
    d << "max relative error " << r.worst_constraint << " over " << r.records_checked << " records";
    return std::make_pair(r.records_checked > 0 && r.worst_constraint < 1e-4, d.str());
  });
  timed("sampling containment", [] {
    const auto r = containment_check(14, 10000);
    std::ostringstream d;
    d << "rate " << r.rate << " (required >= " << r.required << ")";
    return std::make_pair(r.rate >= r.required, d.str());
  });
  return out;
}

}  // namespace zapp::checks
