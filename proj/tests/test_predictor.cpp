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

#include "zapp/planner.hpp"
#include "zapp/predictor.hpp"
#include "zapp/simulator.hpp"
#include "zapp/testing/oracles.hpp"

namespace zapp {
namespace {

using dynamics::State;
using dynamics::World;

State st(double px, double py, double vx, double vy) { return State(px, py, vx, vy); }

ControlSequence constant_controls(int n, const Vector2d& u = Vector2d::Zero()) { return ControlSequence(n, u); }

PredictorConfig quiet_config() {
  PredictorConfig c;
  c.forces.ego_gain = 0.0;
  c.agent_position_std = 0.0;
  return c;
}

TEST(Surrogate, IsolatedAgentExtrapolatesAndAccumulatesNoise) {
  const PredictorConfig cfg = quiet_config();
  SocialForcePredictor pred(cfg, {});
  World w{st(0, 0, 1, 0), {st(5, 5, 1, -0.5)}};
  const StateHistory h{0.1, {w}};
  const auto modes = pred.predict(h, constant_controls(16), 16, 2);
  ASSERT_EQ(modes.size(), 1u);
  const auto& m = modes.front();
  for (int k = 0; k <= 16; ++k) {
    const State expect = st(5 + 0.1 * k, 5 - 0.05 * k, 1, -0.5);
    EXPECT_TRUE(m.means[1][static_cast<std::size_t>(k)].isApprox(expect, 1e-12)) << k;
    // velocity variance grows by exactly q dt per step
    const Eigen::Matrix4d& s = m.covariances[1][static_cast<std::size_t>(k)];
    EXPECT_NEAR(s(2, 2), k * cfg.agent_noise * cfg.dt, 1e-15);
    EXPECT_NEAR(s(3, 3), k * cfg.agent_noise * cfg.dt, 1e-15);
    EXPECT_EQ(s(2, 3), 0.0);
  }
}

TEST(Surrogate, CovarianceMatchesDiscreteLyapunovClosedForm) {
  // position variance of integrated white noise: q dt^3 * sum_{j<k} j^2
  const PredictorConfig cfg = quiet_config();
  SocialForcePredictor pred(cfg, {});
  const auto track = pred.covariance_track(cfg.agent_noise, 16);
  const double q = cfg.agent_noise * cfg.dt;
  for (int k = 0; k <= 16; ++k) {
    double pp = 0.0;
    double pv = 0.0;
    for (int j = 0; j < k; ++j) {
      pp += j * j;
      pv += j;
    }
    EXPECT_NEAR(track[static_cast<std::size_t>(k)](0, 0), q * cfg.dt * cfg.dt * pp, 1e-15);
    EXPECT_NEAR(track[static_cast<std::size_t>(k)](0, 2), q * cfg.dt * pv, 1e-15);
  }
}

TEST(Surrogate, CovarianceIncrementsArePsd) {
  SocialForcePredictor pred(PredictorConfig{}, {});
  Eigen::Matrix4d s0 = Eigen::Matrix4d::Zero();
  s0(0, 0) = s0(1, 1) = 0.0025;
  const auto track = pred.covariance_track(0.02, 16, s0);
  for (std::size_t k = 0; k + 1 < track.size(); ++k) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(track[k + 1] - track[k]);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12) << k;
    EXPECT_TRUE(track[k].isApprox(track[k].transpose(), 0.0));
  }
}

TEST(Surrogate, InverseSquareRatio) {
  dynamics::ForceParams fp;
  fp.ego_gain = 0.0;
  fp.relax_time = 1.0;
  const std::vector<Vector2d> des{Vector2d::Zero(), Vector2d::Zero()};
  auto force_at = [&](double d) {
    World w{st(100, 100, 0, 0), {st(0, 0, 0, 0), st(d, 0, 0, 0)}};
    return dynamics::agent_acceleration(w, 0, {des, {}, {}}, fp, nullptr).norm();
  };
  EXPECT_NEAR(force_at(1.5) / force_at(3.0), 4.0, 1e-12);
}

TEST(Surrogate, RestingAgentStaysAtRest) {
  SocialForcePredictor pred(quiet_config(), {});
  World w{st(-500, 0, 0, 0), {st(0, 0, 0, 0)}};
  const auto m = pred.predict(StateHistory{0.1, {w}}, constant_controls(16), 16, 1).front();
  for (const auto& s : m.means[1]) EXPECT_EQ(s, st(0, 0, 0, 0));
}

TEST(Surrogate, ClampsHoldUnderMaximalForce) {
  dynamics::ForceParams fp;
  // a very close neighbour pushes far beyond the acceleration limit
  World w{st(-100, 0, 0, 0), {st(0, 0, 3.9, 0), st(-0.2, 0, 3.9, 0)}};
  const std::vector<Vector2d> des{Vector2d(4, 0), Vector2d(4, 0)};
  for (int k = 0; k < 10; ++k) {
    const World next = dynamics::step(w, Vector2d(10, 10), 0.1, {des, {}, {}}, fp);
    for (std::size_t i = 0; i < next.agents.size(); ++i) {
      EXPECT_LE(next.agents[i].tail<2>().cwiseAbs().maxCoeff(), 4.0);
      EXPECT_LE(((next.agents[i].tail<2>() - w.agents[i].tail<2>()) / 0.1).cwiseAbs().maxCoeff(), 3.0 + 1e-9);
    }
    EXPECT_LE(next.ego.tail<2>().cwiseAbs().maxCoeff(), 4.0);
    w = next;
  }
}

TEST(Surrogate, CoincidentAgentsRaise) {
  SocialForcePredictor pred(PredictorConfig{}, {});
  World w{st(-10, 0, 0, 0), {st(0, 0, 0, 0), st(0, 0, 0, 0)}};
  EXPECT_THROW(pred.predict(StateHistory{0.1, {w}}, constant_controls(16), 16, 1), NumericalError);
}

TEST(Predict, InputValidation) {
  SocialForcePredictor pred(PredictorConfig{}, {});
  EXPECT_THROW(pred.predict(StateHistory{}, constant_controls(16), 16, 1), InvalidArgument);
  World bad{st(0, 0, 0, 0), {st(std::nan(""), 0, 0, 0)}};
  EXPECT_THROW(pred.predict(StateHistory{0.1, {bad}}, constant_controls(16), 16, 1), InvalidArgument);
  World ok{st(0, 0, 0, 0), {st(5, 0, 0, 0)}};
  EXPECT_THROW(pred.predict(StateHistory{0.1, {ok}}, constant_controls(3), 16, 1), InvalidArgument);
  EXPECT_THROW(pred.predict(StateHistory{0.1, {ok}}, constant_controls(16), 0, 1), InvalidArgument);
  EXPECT_THROW(pred.predict(StateHistory{0.1, {ok}}, constant_controls(16), 16, 0), InvalidArgument);
}

TEST(Modes, NoNearbyAgentsGivesSingleMode) {
  SocialForcePredictor pred(PredictorConfig{}, {});
  World w{st(0, 0, 0, 0), {st(30, 3, 0, 0), st(-30, -3, 0, 0)}};
  const auto seeds = pred.mode_enumerate(StateHistory{0.1, {w}}, constant_controls(16), 16);
  ASSERT_EQ(seeds.size(), 1u);
  EXPECT_DOUBLE_EQ(seeds.front().gamma, 1.0);
}

TEST(Modes, HeadOnAgentSplitsLaterally) {
  SocialForcePredictor pred(PredictorConfig{}, {});
  World w{st(0, 0, 2, 0), {st(6, 0.05, -1.5, 0)}};
  const StateHistory h{0.1, {w}};
  PlannerConfig pc;
  const ControlSequence nominal = nominal_controls(w.ego, Vector2d(28, 0), pc);
  const auto seeds = pred.mode_enumerate(h, nominal, 16);
  ASSERT_EQ(seeds.size(), 2u);
  EXPECT_NEAR(seeds[0].gamma + seeds[1].gamma, 1.0, 1e-12);
  const auto modes = pred.predict(h, nominal, 16, 2);
  ASSERT_EQ(modes.size(), 2u);
  EXPECT_GE(modes[0].gamma, modes[1].gamma);
  // the agent passes on opposite sides of the ego in the two modes
  const auto side = [&](const ModePrediction& m) {
    for (std::size_t k = 0; k < m.means[1].size(); ++k) {
      if (m.means[1][k].x() <= m.means[0][k].x()) return m.means[1][k].y() - m.means[0][k].y();
    }
    return m.means[1].back().y() - m.means[0].back().y();
  };
  EXPECT_LT(side(modes[0]) * side(modes[1]), 0.0);
}

TEST(Modes, GammasFormADistribution) {
  std::mt19937_64 rng(21);
  PlannerConfig pc;
  for (int t = 0; t < 10; ++t) {
    const sim::Scene scene = sim::generate_scene(rng());
    SocialForcePredictor pred(PredictorConfig{}, sim::wall_boxes(scene.walls));
    const World w = sim::initial_world(scene);
    const auto seeds =
        pred.mode_enumerate(StateHistory{0.1, {w}}, nominal_controls(w.ego, scene.goal, pc), pc.horizon);
    double total = 0.0;
    for (const auto& s : seeds) {
      EXPECT_GE(s.gamma, 0.0);
      total += s.gamma;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

struct RandomScene {
  StateHistory history;
  ControlSequence nominal;
  std::vector<dynamics::Box> walls;
};

RandomScene random_scene(std::mt19937_64& rng) {
  const sim::Scene scene = sim::generate_scene(rng());
  World w = sim::initial_world(scene);
  std::uniform_real_distribution<double> x(0.0, 20.0);
  std::uniform_real_distribution<double> y(-2.0, 2.0);
  std::uniform_real_distribution<double> v(0.0, 3.0);
  w.ego << x(rng), y(rng), v(rng), 0.0;
  for (const auto& a : w.agents)
    if ((a.head<2>() - w.ego.head<2>()).norm() < 1.2) w.ego.y() += 2.5;
  // controls strictly inside the clamp so finite differences do not straddle a kink
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  ControlSequence controls(16);
  for (auto& c : controls) c = Vector2d(u(rng), u(rng));
  return {StateHistory{0.1, {w}}, controls, sim::wall_boxes(scene.walls)};
}

TEST(Jacobian, MatchesFiniteDifferencesOnRandomScenes) {
  std::mt19937_64 rng(22);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const RandomScene rs = random_scene(rng);
    SocialForcePredictor pred(PredictorConfig{}, rs.walls);
    const auto desired = pred.desired_velocities(rs.history);
    const auto base = pred.rollout(rs.history.current(), rs.nominal, 16, desired, {}, true);
    const Index nu = 32;
    MatrixXd fd(base.jacobians.back().rows(), nu);
    const double h = 1e-4;
    for (Index j = 0; j < nu; ++j) {
      ControlSequence up = rs.nominal;
      ControlSequence dn = rs.nominal;
      up[static_cast<std::size_t>(j / 2)](j % 2) += h;
      dn[static_cast<std::size_t>(j / 2)](j % 2) -= h;
      const auto a = pred.rollout(rs.history.current(), up, 16, desired, {}, false);
      const auto b = pred.rollout(rs.history.current(), dn, 16, desired, {}, false);
      fd.col(j) = (dynamics::stack(a.states.back()) - dynamics::stack(b.states.back())) / (2 * h);
    }
    const MatrixXd& an = base.jacobians.back();
    const double err = (an - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
    worst = std::max(worst, err);
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Jacobian, PredictedShiftMatchesLinearization) {
  std::mt19937_64 rng(23);
  const RandomScene rs = random_scene(rng);
  SocialForcePredictor pred(PredictorConfig{}, rs.walls);
  const auto m = pred.predict(rs.history, rs.nominal, 16, 1).front();
  for (int j : {0, 7, 20}) {
    ControlSequence up = rs.nominal;
    up[static_cast<std::size_t>(j / 2)](j % 2) += 1e-4;
    VectorXd du = VectorXd::Zero(32);
    du(j) = 1e-4;
    const auto mu = pred.predict(rs.history, up, 16, 1).front();
    ASSERT_EQ(mu.mode_id, m.mode_id);
    for (int s = 0; s < m.slots(); ++s) {
      const auto slot = static_cast<std::size_t>(s);
      const Eigen::Vector4d shift = mu.means[slot].back() - m.means[slot].back();
      const Eigen::Vector4d lin = m.jacobians[slot].back() * du;
      EXPECT_LE((shift - lin).cwiseAbs().maxCoeff(), 1e-3 * std::max(lin.cwiseAbs().maxCoeff(), 1e-9)) << s;
    }
  }
}

TEST(Jacobian, CausalityExactZeros) {
  std::mt19937_64 rng(24);
  for (int t = 0; t < 10; ++t) {
    const RandomScene rs = random_scene(rng);
    SocialForcePredictor pred(PredictorConfig{}, rs.walls);
    const auto m = pred.predict(rs.history, rs.nominal, 16, 2).front();
    for (const auto& slot : m.jacobians)
      for (std::size_t k = 0; k < slot.size(); ++k) {
        const Index from = 2 * static_cast<Index>(k);
        EXPECT_TRUE((slot[k].rightCols(32 - from).array() == 0.0).all()) << k;
      }
  }
}

TEST(DesiredVelocity, SingleFrameUsesCurrentVelocity) {
  SocialForcePredictor pred(PredictorConfig{}, {});
  World w{st(0, 0, 0, 0), {st(5, 0, 1.2, -0.3)}};
  EXPECT_EQ(pred.desired_velocities(StateHistory{0.1, {w}})[0], Vector2d(1.2, -0.3));
}

TEST(DesiredVelocity, RecoversRelaxationTarget) {
  // agents relaxing toward known desired velocities under the simulator's law
  dynamics::ForceParams fp;
  const std::vector<Vector2d> des{Vector2d(1.5, 0.2), Vector2d(-1.0, 0.0)};
  World w{st(-20, 0, 0, 0), {st(0, 1, 0.5, 0), st(6, -1, 0, 0)}};
  StateHistory h{0.1, {w}};
  for (int k = 0; k < 30; ++k) {
    w = dynamics::step(w, Vector2d::Zero(), 0.01, {des, {}, {}}, fp);
    if ((k + 1) % 10 == 0) h.frames.push_back(w);
  }
  PredictorConfig cfg;
  cfg.forces = fp;
  SocialForcePredictor pred(cfg, {});
  const auto est = pred.desired_velocities(h);
  for (std::size_t i = 0; i < des.size(); ++i) EXPECT_LT((est[i] - des[i]).norm(), 0.1) << i;
}

TEST(Predict, IsPureAndDeterministic) {
  std::mt19937_64 rng(25);
  const RandomScene rs = random_scene(rng);
  SocialForcePredictor pred(PredictorConfig{}, rs.walls);
  const auto a = pred.predict(rs.history, rs.nominal, 16, 2);
  const auto b = pred.predict(rs.history, rs.nominal, 16, 2);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t y = 0; y < a.size(); ++y) {
    EXPECT_EQ(a[y].gamma, b[y].gamma);
    for (std::size_t s = 0; s < a[y].means.size(); ++s)
      for (std::size_t k = 0; k < a[y].means[s].size(); ++k) {
        EXPECT_EQ(a[y].means[s][k], b[y].means[s][k]);
        EXPECT_EQ(a[y].jacobians[s][k], b[y].jacobians[s][k]);
      }
  }
}

}  // namespace
}  // namespace zapp
