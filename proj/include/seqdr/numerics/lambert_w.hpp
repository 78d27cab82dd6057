#pragma once

#include <cmath>
#include <limits>

#include "seqdr/error.hpp"

namespace seqdr::numerics {

enum class LambertBranch { principal, lower };

inline constexpr double kInvE = 0.36787944117144232159552377016146087;

// Omega constant, W0(1).
inline constexpr double kOmega = 0.56714329040978387299996866221035555;

namespace detail {

// Series about the branch point -1/e in p = sqrt(2(e z + 1)).
// sign = +1 for the principal branch, -1 for the lower branch.
inline double lambert_branch_point_series(double z, double sign) {
  const double p = sign * std::sqrt(std::max(0.0, 2.0 * (std::exp(1.0) * z + 1.0)));
  return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
}

inline double lambert_initial_guess(LambertBranch branch, double z) {
  if (branch == LambertBranch::lower) {
    if (z < -0.25) return lambert_branch_point_series(z, -1.0);
    const double l = std::log(-z);
    return l - std::log(-l);
  }
  if (z < -0.25) return lambert_branch_point_series(z, 1.0);
  if (z < 3.0) return std::log1p(z) * (1.0 - std::log1p(z) / (2.0 + std::log1p(z)));
  const double l1 = std::log(z);
  const double l2 = std::log(l1);
  return l1 - l2 + l2 / l1;
}

}  // namespace detail

// Real branches of the Lambert W function, w such that w e^w = z.
// Halley refinement from a branch-specific starting point, at most 50 steps.
inline double lambert_w(LambertBranch branch, double z) {
  if (!std::isfinite(z)) throw DomainError("lambert_w: non-finite argument");
  // A few ulps of slack so that -exp(-1) computed in double lands on the branch point.
  constexpr double kSlack = 4.0 * std::numeric_limits<double>::epsilon();
  if (z < -kInvE * (1.0 + kSlack)) throw DomainError("lambert_w: argument below -1/e");
  if (branch == LambertBranch::lower && z >= 0.0)
    throw DomainError("lambert_w: lower branch requires z < 0");
  if (z <= -kInvE) return -1.0;
  if (z == 0.0) return 0.0;

  double w = detail::lambert_initial_guess(branch, z);
  for (int iter = 0; iter < 50; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - z;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    if (!std::isfinite(step)) break;
    w -= step;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(w))) break;
  }
  if (branch == LambertBranch::lower && w > -1.0) w = -1.0;
  if (branch == LambertBranch::principal && w < -1.0) w = -1.0;
  return w;
}

}  // namespace seqdr::numerics
