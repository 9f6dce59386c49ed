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

#include <span>
#include <vector>

#include "zapp/error.hpp"
#include "zapp/predictor.hpp"
#include "zapp/zonotope.hpp"

namespace zapp {

// Z_i(k) for every slot (ego first) and step k = 0..kf of one mode.
struct DiscreteReachSet {
  std::vector<std::vector<Zonotope>> sets;  // [slot][k]

  int steps() const { return sets.empty() ? 0 : static_cast<int>(sets.front().size()); }
};

// The continuous-time set over [k dt, (k+1) dt] is the union of both pieces;
// it is never merged into a single convex set.
struct ContinuousPiecePair {
  Zonotope a;  // grown from Z(k) halfway toward k+1
  Zonotope b;  // grown from Z(k+1) halfway back toward k
};

struct ContinuousReachSet {
  std::vector<std::vector<ContinuousPiecePair>> pieces;  // [slot][interval]

  int intervals() const { return pieces.empty() ? 0 : static_cast<int>(pieces.front().size()); }
};

inline Zonotope scale(const Zonotope& z, double factor) {
  return Zonotope(factor * z.center(), factor * z.generators());
}

inline DiscreteReachSet discrete_reach(const ModePrediction& pred, double alpha) {
  DiscreteReachSet out;
  out.sets.resize(pred.means.size());
  for (std::size_t s = 0; s < pred.means.size(); ++s) {
    const auto& means = pred.means[s];
    if (pred.covariances[s].size() != means.size()) {
      throw DimensionMismatch("discrete_reach", static_cast<std::int64_t>(means.size()),
                              static_cast<std::int64_t>(pred.covariances[s].size()));
    }
    const double eps = stats::confidence_scale(alpha, static_cast<int>(means.front().size()));
    for (std::size_t k = 0; k < means.size(); ++k) {
      const MatrixXd& sigma = pred.covariances[s][k];
      if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
        throw InvalidArgument("discrete_reach: covariance is not symmetric");
      }
      out.sets[s].push_back(normalize_generators(confidence_zonotope_scaled(means[k], sigma, eps)));
    }
  }
  return out;
}

// L = Z((a + b) / 2, (b - a) / 2).
inline Zonotope line_segment_zonotope(const VectorXd& from, const VectorXd& to) {
  if (from.size() != to.size()) {
    throw DimensionMismatch("line_segment_zonotope", from.size(), to.size());
  }
  MatrixXd g = 0.5 * (to - from);
  return Zonotope(0.5 * (from + to), std::move(g));
}

// Centers and the extra generator of both pieces in closed form:
// center_a = mu_k + d/4, center_b = mu_k1 - d/4, generator d/4,
// with d = mu_k1 - mu_k. Works for plain vectors and for affine
// (decision-dependent) points alike.
template <class V>
struct PieceOffsets {
  V center_a;
  V center_b;
  V generator;
};

template <class V>
PieceOffsets<V> continuous_piece_offsets(const V& mu_k, const V& mu_k1) {
  const V quarter = 0.25 * (mu_k1 - mu_k);
  return PieceOffsets<V>{mu_k + quarter, mu_k1 - quarter, quarter};
}

// Z(k) + (L(k) - mu(k)) / 2  and  Z(k+1) + (L(k) - mu(k+1)) / 2, with the
// predicted mean standing in for the random state inside the segment offset.
inline ContinuousReachSet continuous_reach(const DiscreteReachSet& dr) {
  if (dr.steps() < 2) throw InvalidArgument("continuous_reach: need at least 2 steps");
  ContinuousReachSet out;
  out.pieces.resize(dr.sets.size());
  for (std::size_t s = 0; s < dr.sets.size(); ++s) {
    const auto& z = dr.sets[s];
    for (std::size_t k = 0; k + 1 < z.size(); ++k) {
      const VectorXd& mu_k = z[k].center();
      const VectorXd& mu_k1 = z[k + 1].center();
      const Zonotope segment = line_segment_zonotope(mu_k, mu_k1);
      const Zonotope toward_next = scale(translate(segment, -mu_k), 0.5);
      const Zonotope toward_prev = scale(translate(segment, -mu_k1), 0.5);
      out.pieces[s].push_back(
          ContinuousPiecePair{minkowski_sum(z[k], toward_next), minkowski_sum(z[k + 1], toward_prev)});
    }
  }
  return out;
}

// Joint set of all slots for one interval or step: Z_e x Z_1 x ... x Z_m.
inline Zonotope joint_reach(std::span<const Zonotope> per_agent) {
  if (per_agent.empty()) throw InvalidArgument("joint_reach: no agents");
  Zonotope out = per_agent.front();
  for (std::size_t i = 1; i < per_agent.size(); ++i) out = cartesian_product(out, per_agent[i]);
  return out;
}

// Joint continuous set of one interval; `use_b` picks the second piece.
inline Zonotope joint_reach(const ContinuousReachSet& cr, int interval, bool use_b) {
  std::vector<Zonotope> parts;
  for (const auto& slot : cr.pieces) {
    if (interval < 0 || interval >= static_cast<int>(slot.size())) {
      throw InvalidArgument("joint_reach: interval " + std::to_string(interval) + " missing for a slot");
    }
    const auto& pair = slot[static_cast<std::size_t>(interval)];
    parts.push_back(use_b ? pair.b : pair.a);
  }
  return joint_reach(parts);
}

}  // namespace zapp
