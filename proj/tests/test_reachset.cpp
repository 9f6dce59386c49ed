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

#include <gtest/gtest.h>

#include <random>

#include "zapp/reachset.hpp"
#include "zapp/selftest.hpp"
#include "zapp/testing/oracles.hpp"

namespace zapp {
namespace {

using Eigen::Matrix4d;
using Eigen::Vector4d;

// One-slot prediction with the given means and a shared covariance.
ModePrediction single_slot(const std::vector<Vector4d>& means, const Matrix4d& sigma) {
  ModePrediction p;
  p.means = {means};
  p.covariances = {std::vector<Matrix4d>(means.size(), sigma)};
  p.jacobians = {std::vector<MatrixXd>(means.size(), MatrixXd::Zero(4, 2))};
  return p;
}

ModePrediction random_prediction(std::mt19937_64& rng, int steps) {
  std::normal_distribution<double> nd;
  std::vector<Vector4d> means;
  Vector4d x(nd(rng), nd(rng), 2 * nd(rng), 2 * nd(rng));
  for (int k = 0; k <= steps; ++k) {
    means.push_back(x);
    x.head<2>() += 0.1 * x.tail<2>();
  }
  const Matrix4d l = Matrix4d::Random() * 0.2;
  ModePrediction p = single_slot(means, l * l.transpose());
  return p;
}

bool in_set(const Zonotope& z, const Vector2d& p, double tol = 1e-9) {
  return contains(to_hrep(normalize_generators(project(z, {0, 1}))), p, tol);
}

TEST(Discrete, ZeroCovarianceIsPointAtMean) {
  const Vector4d mu(1, 2, 3, 4);
  const auto dr = discrete_reach(single_slot({mu, mu}, Matrix4d::Zero()), 1.0);
  const Zonotope& z = dr.sets[0][0];
  EXPECT_EQ(z.center(), VectorXd(mu));
  ASSERT_EQ(z.num_generators(), 1);
  EXPECT_LE(z.generators().norm(), kGeneratorEpsilon * (1 + 1e-12));
}

TEST(Discrete, IsotropicCovarianceGivesSquare) {
  const double sigma = 0.3;
  const auto dr = discrete_reach(single_slot({Vector4d::Zero(), Vector4d::Zero()}, sigma * sigma * Matrix4d::Identity()), 1.0);
  const double half = stats::confidence_scale(1.0, 4) * sigma;
  const HPolytope h = to_hrep(normalize_generators(project(dr.sets[0][1], {0, 1})));
  for (const Vector2d& dir : {Vector2d(1, 0), Vector2d(0, 1), Vector2d(-1, 0), Vector2d(0, -1)}) {
    EXPECT_NEAR(point_outside_margin(h, half * dir), 0.0, 1e-12);
  }
  EXPECT_NEAR(point_outside_margin(h, Vector2d(half, half)), 0.0, 1e-12);
}

TEST(Discrete, GeneratorCountMatchesStateDimension) {
  std::mt19937_64 rng(31);
  const auto dr = discrete_reach(random_prediction(rng, 4), 1.0);
  for (const auto& z : dr.sets[0]) EXPECT_EQ(z.num_generators(), 4);
}

TEST(Discrete, GaussianContainmentRate) {
  const auto r = checks::containment_check(32, 10000, 1.0);
  EXPECT_GE(r.rate, r.required);
  EXPECT_NEAR(r.required, std::erf(1.0 / std::sqrt(2.0)), 1e-12);
}

TEST(Discrete, RejectsAsymmetricCovariance) {
  Matrix4d bad = Matrix4d::Identity();
  bad(0, 1) = 0.1;
  EXPECT_THROW(discrete_reach(single_slot({Vector4d::Zero(), Vector4d::Zero()}, bad), 1.0), InvalidArgument);
}

TEST(Segment, CoincidentEndpointsGivePoint) {
  const Zonotope l = line_segment_zonotope(Vector2d(1, 1), Vector2d(1, 1));
  EXPECT_TRUE(l.generators().isZero());
  EXPECT_EQ(l.center(), Vector2d(1, 1));
}

TEST(Segment, DirectFormula) {
  const Zonotope l = line_segment_zonotope(Vector2d(0, 0), Vector2d(2, 0));
  EXPECT_EQ(l.center(), Vector2d(1, 0));
  ASSERT_EQ(l.num_generators(), 1);
  EXPECT_EQ(l.generators().col(0), Vector2d(1, 0));
  EXPECT_EQ(l.at(VectorXd::Constant(1, -1.0)), Vector2d(0, 0));
  EXPECT_EQ(l.at(VectorXd::Constant(1, 1.0)), Vector2d(2, 0));
}

TEST(Segment, DimensionMismatch) {
  EXPECT_THROW(line_segment_zonotope(Vector2d::Zero(), VectorXd::Zero(3)), DimensionMismatch);
}

TEST(Continuous, StationaryAgentKeepsDiscreteSets) {
  std::mt19937_64 rng(33);
  const Vector4d mu(3, -1, 0, 0);
  const Matrix4d l = Matrix4d::Random() * 0.3;
  const auto dr = discrete_reach(single_slot({mu, mu, mu}, l * l.transpose()), 1.0);
  const auto cr = continuous_reach(dr);
  for (int k = 0; k < 2; ++k) {
    const auto& pair = cr.pieces[0][static_cast<std::size_t>(k)];
    EXPECT_EQ(pair.a.center(), dr.sets[0][static_cast<std::size_t>(k)].center());
    EXPECT_TRUE(pair.a.generators().rightCols(1).isZero());
    EXPECT_EQ(normalize_generators(pair.a).generators(), dr.sets[0][static_cast<std::size_t>(k)].generators());
    EXPECT_EQ(normalize_generators(pair.b).generators(), dr.sets[0][static_cast<std::size_t>(k) + 1].generators());
  }
}

TEST(Continuous, StraightMotionSplitsTheSegment) {
  const Vector4d a(0, 0, 10, 0);
  const Vector4d b(1, 0, 10, 0);
  const auto cr = continuous_reach(discrete_reach(single_slot({a, b}, Matrix4d::Zero()), 1.0));
  const auto& pair = cr.pieces[0][0];
  // piece a spans [0, 0.5], piece b spans [0.5, 1] along x
  const Zonotope pa = normalize_generators(project(pair.a, {0, 1}));
  const Zonotope pb = normalize_generators(project(pair.b, {0, 1}));
  EXPECT_NEAR(pa.center().x(), 0.25, 1e-12);
  EXPECT_NEAR(pb.center().x(), 0.75, 1e-12);
  EXPECT_NEAR(pa.generators().row(0).cwiseAbs().sum(), 0.25, 1e-8);
  EXPECT_NEAR(pb.generators().row(0).cwiseAbs().sum(), 0.25, 1e-8);
}

TEST(Continuous, NeedsTwoSteps) {
  const auto dr = discrete_reach(single_slot({Vector4d::Zero()}, Matrix4d::Zero()), 1.0);
  EXPECT_THROW(continuous_reach(dr), InvalidArgument);
}

TEST(Continuous, PiecesContainMidpointAndEndpoints) {
  std::mt19937_64 rng(34);
  for (int t = 0; t < 20; ++t) {
    const auto pred = random_prediction(rng, 8);
    const auto dr = discrete_reach(pred, 1.0);
    const auto cr = continuous_reach(dr);
    for (int k = 0; k < cr.intervals(); ++k) {
      const auto& pair = cr.pieces[0][static_cast<std::size_t>(k)];
      const Vector2d mk = pred.means[0][static_cast<std::size_t>(k)].head<2>();
      const Vector2d mk1 = pred.means[0][static_cast<std::size_t>(k) + 1].head<2>();
      EXPECT_TRUE(in_set(pair.a, 0.5 * (mk + mk1)));
      EXPECT_TRUE(in_set(pair.b, 0.5 * (mk + mk1)));
      EXPECT_TRUE(in_set(pair.a, mk));
      EXPECT_TRUE(in_set(pair.b, mk1));
    }
  }
}

TEST(Continuous, PieceAContainsQuarterShiftedDiscreteSet) {
  std::mt19937_64 rng(35);
  const auto pred = random_prediction(rng, 6);
  const auto dr = discrete_reach(pred, 1.0);
  const auto cr = continuous_reach(dr);
  for (int k = 0; k < cr.intervals(); ++k) {
    const Zonotope zk = project(dr.sets[0][static_cast<std::size_t>(k)], {0, 1});
    const Vector2d d = (pred.means[0][static_cast<std::size_t>(k) + 1] - pred.means[0][static_cast<std::size_t>(k)]).head<2>();
    for (const Vector2d& v : oracle::zonotope_polygon(zk)) {
      EXPECT_TRUE(in_set(cr.pieces[0][static_cast<std::size_t>(k)].a, v + 0.25 * d));
    }
  }
}

TEST(Continuous, CoverageOfInterpolatedMotion) {
  const auto r = checks::coverage_check(36, 5, 2000);
  EXPECT_EQ(r.instances, 5);
  EXPECT_GE(r.worst_rate, 0.99);
}

TEST(Joint, BlockDiagonalProduct) {
  const Zonotope a(Vector2d(1, 2), Eigen::Matrix2d::Identity());
  const Zonotope b(Vector2d(3, 4), 2 * Eigen::Matrix2d::Identity());
  const std::vector<Zonotope> parts{a, b};
  const Zonotope j = joint_reach(parts);
  EXPECT_EQ(j.dim(), 4);
  EXPECT_EQ(j.center(), Vector4d(1, 2, 3, 4));
  EXPECT_TRUE(j.generators().topRightCorner(2, 2).isZero());
  EXPECT_TRUE(j.generators().bottomLeftCorner(2, 2).isZero());
  const Zonotope ego = project(j, {0, 1});
  EXPECT_EQ(ego.center(), a.center());
  EXPECT_EQ(normalize_generators(ego).generators(), a.generators());
}

TEST(Joint, ContinuousMembershipFactorizes) {
  std::mt19937_64 rng(37);
  ModePrediction p = random_prediction(rng, 4);
  const ModePrediction q = random_prediction(rng, 4);
  p.means.push_back(q.means[0]);
  p.covariances.push_back(q.covariances[0]);
  p.jacobians.push_back(q.jacobians[0]);
  const auto cr = continuous_reach(discrete_reach(p, 1.0));
  const Zonotope j = joint_reach(cr, 2, true);
  EXPECT_EQ(j.dim(), 8);
  for (int s = 0; s < 100; ++s) {
    const VectorXd x = oracle::sample_in_zonotope(j, rng);
    EXPECT_TRUE(in_set(cr.pieces[0][2].b, x.head<2>()));
    EXPECT_TRUE(in_set(Zonotope(cr.pieces[1][2].b.center(), cr.pieces[1][2].b.generators()), x.segment<2>(4)));
  }
  EXPECT_THROW(joint_reach(cr, 4, false), InvalidArgument);
  EXPECT_THROW(joint_reach(std::vector<Zonotope>{}), InvalidArgument);
}

}  // namespace
}  // namespace zapp
