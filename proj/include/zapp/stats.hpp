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

#include <cmath>
#include <limits>

#include "zapp/error.hpp"

namespace zapp::stats {

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
// Series expansion below x < a + 1, Lentz continued fraction above.
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) {
    throw InvalidArgument("regularized_gamma_p: requires a > 0 and x >= 0");
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 10000;

  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < kMaxIter; ++n) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(log_prefix);
  }

  // Q(a, x) by modified Lentz.
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return 1.0 - std::exp(log_prefix) * h;
}

inline double chi2_cdf(double x, int dof) {
  if (dof <= 0) throw InvalidArgument("chi2_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

inline double chi2_pdf(double x, int dof) {
  if (x <= 0.0) return 0.0;
  const double k = 0.5 * dof;
  return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) -
                  std::lgamma(k));
}

// Inverse chi-squared CDF. Newton iterations safeguarded by a bisection
// bracket; converges to relative tolerance well below 1e-10.
inline double chi2inv(double p, int dof) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidArgument("chi2inv: probability must lie in (0, 1)");
  }
  if (dof <= 0) throw InvalidArgument("chi2inv: dof must be positive");

  double lo = 0.0;
  double hi = static_cast<double>(dof);
  while (chi2_cdf(hi, dof) < p) {
    lo = hi;
    hi *= 2.0;
  }
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = chi2_cdf(x, dof) - p;
    if (f == 0.0) return x;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double dens = chi2_pdf(x, dof);
    double next = dens > 0.0 ? x - f / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * std::max(1.0, x)) return next;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) return next;
    x = next;
  }
  return x;
}

// Scale factor turning eigen-axes sqrt(lambda_j) v_j into the confidence
// region of `dof`-dimensional Gaussian at sigma-level alpha:
// sqrt(chi2inv_dof(erf(alpha / sqrt(2)))).
inline double confidence_scale(double alpha, int dof) {
  if (!(alpha > 0.0)) throw InvalidArgument("confidence_scale: alpha must be > 0");
  const double p = std::erf(alpha / std::sqrt(2.0));
  if (!(p < 1.0)) {
    throw InvalidArgument("confidence_scale: alpha too large, erf saturates to 1");
  }
  return std::sqrt(chi2inv(p, dof));
}

}  // namespace zapp::stats
