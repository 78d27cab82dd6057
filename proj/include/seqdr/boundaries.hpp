#pragma once

// Time-uniform confidence radii and the tuning of the normal-mixture prior.
//
// Every radius is reported without the almost-sure approximation error of the
// asymptotic construction (it has no computable constant); callers gate
// emission by a minimum time instead.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "seqdr/error.hpp"
#include "seqdr/numerics/lambert_w.hpp"
#include "seqdr/numerics/linalg.hpp"
#include "seqdr/numerics/moments.hpp"
#include "seqdr/numerics/special.hpp"

namespace seqdr::boundaries {

enum class BoundaryFamily { normal_mixture, lil, non_iid };

inline std::string_view to_string(BoundaryFamily family) {
  switch (family) {
    case BoundaryFamily::normal_mixture: return "normal_mixture";
    case BoundaryFamily::lil: return "lil";
    case BoundaryFamily::non_iid: return "non_iid";
  }
  return "unknown";
}

inline BoundaryFamily parse_family(std::string_view name) {
  if (name == "normal_mixture" || name == "mixture") return BoundaryFamily::normal_mixture;
  if (name == "lil") return BoundaryFamily::lil;
  if (name == "non_iid") return BoundaryFamily::non_iid;
  throw DomainError("unknown boundary family: " + std::string(name));
}

// Largest alpha for which the exact rho optimum exists, sqrt(W0(1)).
inline const double kMaxExactAlpha = std::sqrt(numerics::kOmega);

struct BoundarySpec {
  double alpha = 0.05;
  double rho = 1.0;
  BoundaryFamily family = BoundaryFamily::normal_mixture;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("BoundarySpec: alpha must lie in (0, 1)");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("BoundarySpec: rho must be positive");
  }
};

// One reported interval: estimate +/- radius.
struct CsPoint {
  std::uint64_t t = 0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double radius = 0.0;
  double var_hat = 0.0;

  static CsPoint make(std::uint64_t t, double estimate, double radius, double var_hat) {
    return CsPoint{t, estimate, estimate - radius, estimate + radius, radius, var_hat};
  }

  bool contains(double value) const { return lower <= value && value <= upper; }
  double width() const { return upper - lower; }
};

// Cumulative sum W_t of standard Gaussian increments.
struct MartingaleState {
  std::uint64_t t = 0;
  double w = 0.0;

  void push(double g) {
    ++t;
    w += g;
  }
};

namespace detail {

inline void require_time(std::uint64_t t, const char* who) {
  if (t == 0) throw DomainError(std::string(who) + ": t must be >= 1");
}

inline void require_scale(double s, const char* who) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError(std::string(who) + ": scale must be finite and >= 0");
}

}  // namespace detail

// Normal-mixture radius for a standard-deviation estimate sigma_hat:
//   sigma_hat * sqrt( 2(t rho^2 + 1) / (t^2 rho^2) * log( sqrt(t rho^2 + 1) / alpha ) ).
inline double mixture_radius(std::uint64_t t, double sigma_hat, double alpha, double rho) {
  detail::require_time(t, "mixture_radius");
  detail::require_scale(sigma_hat, "mixture_radius");
  BoundarySpec{alpha, rho}.validate();
  const double td = static_cast<double>(t);
  const double a = td * rho * rho + 1.0;
  return sigma_hat * std::sqrt(2.0 * a / (td * td * rho * rho) * std::log(std::sqrt(a) / alpha));
}

inline double mixture_radius(std::uint64_t t, double sigma_hat, const BoundarySpec& spec) {
  return mixture_radius(t, sigma_hat, spec.alpha, spec.rho);
}

// Iterated-logarithm radius 1.7 sigma sqrt((log log 2t + 0.72 log(5.2/alpha)) / t).
inline double lil_radius(std::uint64_t t, double sigma_hat, double alpha) {
  detail::require_time(t, "lil_radius");
  detail::require_scale(sigma_hat, "lil_radius");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("lil_radius: alpha must lie in (0, 1)");
  const double td = static_cast<double>(t);
  return 1.7 * sigma_hat * std::sqrt((std::log(std::log(2.0 * td)) + 0.72 * std::log(5.2 / alpha)) / td);
}

// Radius for independent, non-identically distributed data with average
// variance estimate sigma_bar_sq_hat:
//   (1/t) sqrt( 2(t s^2 rho^2 + 1) / rho^2 * log( sqrt(t s^2 rho^2 + 1) / alpha ) ).
// Equals mixture_radius(t, 1, ...) when s^2 = 1.
inline double non_iid_radius(std::uint64_t t, double sigma_bar_sq_hat, const BoundarySpec& spec) {
  detail::require_time(t, "non_iid_radius");
  detail::require_scale(sigma_bar_sq_hat, "non_iid_radius");
  spec.validate();
  const double td = static_cast<double>(t);
  const double rho2 = spec.rho * spec.rho;
  const double a = td * sigma_bar_sq_hat * rho2 + 1.0;
  return std::sqrt(2.0 * a / rho2 * std::log(std::sqrt(a) / spec.alpha)) / td;
}

// Radius from a variance estimate, using the boundary family named in `spec`.
inline double radius(std::uint64_t t, double var_hat, const BoundarySpec& spec) {
  switch (spec.family) {
    case BoundaryFamily::normal_mixture: return mixture_radius(t, std::sqrt(var_hat), spec);
    case BoundaryFamily::lil: return lil_radius(t, std::sqrt(var_hat), spec.alpha);
    case BoundaryFamily::non_iid: return non_iid_radius(t, var_hat, spec);
  }
  throw DomainError("radius: unknown boundary family");
}

// Fixed-time CLT interval half-width sigma * q_{1 - alpha/2} / sqrt(t).
inline double fixed_ci_radius(std::uint64_t t, double sigma_hat, double alpha) {
  detail::require_time(t, "fixed_ci_radius");
  detail::require_scale(sigma_hat, "fixed_ci_radius");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("fixed_ci_radius: alpha must lie in (0, 1)");
  return sigma_hat * numerics::normal_quantile(1.0 - alpha / 2.0) / std::sqrt(static_cast<double>(t));
}

// Closed form of the Gaussian-mixed exponential martingale,
//   exp{ rho^2 W_t^2 / (2(t rho^2 + 1)) } / sqrt(t rho^2 + 1).
inline double mixture_martingale(const MartingaleState& state, double rho) {
  if (!(rho > 0.0)) throw DomainError("mixture_martingale: rho must be positive");
  const double a = static_cast<double>(state.t) * rho * rho + 1.0;
  return std::exp(rho * rho * state.w * state.w / (2.0 * a)) / std::sqrt(a);
}

enum class RhoMethod { exact, approx };

inline RhoMethod parse_rho_method(std::string_view name) {
  if (name == "exact") return RhoMethod::exact;
  if (name == "approx") return RhoMethod::approx;
  throw DomainError("unknown rho tuning method: " + std::string(name));
}

// Mixture scale rho minimizing the normal-mixture radius at time t_star.
// exact: sqrt((-W_{-1}(-alpha^2 e^{alpha^2 - 1}) - 1) / t_star), needs alpha < sqrt(Omega).
// approx: W_{-1}(z) replaced by log(-z) - log(-log(-z)).
inline double tune_rho(double alpha, std::uint64_t t_star, RhoMethod method) {
  if (t_star == 0) throw DomainError("tune_rho: t_star must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("tune_rho: alpha must lie in (0, 1)");
  const double a2 = alpha * alpha;
  const double td = static_cast<double>(t_star);
  if (method == RhoMethod::exact) {
    if (alpha >= kMaxExactAlpha) throw DomainError("tune_rho: exact tuning requires alpha < sqrt(Omega) ~ 0.7531");
    const double w = numerics::lambert_w(numerics::LambertBranch::lower, -a2 * std::exp(a2 - 1.0));
    return std::sqrt((-w - 1.0) / td);
  }
  const double numer = -a2 - 2.0 * std::log(alpha) + std::log(-2.0 * std::log(alpha) + 1.0 - a2);
  if (!(numer > 0.0)) throw DomainError("tune_rho: approximation undefined at this alpha");
  return std::sqrt(numer / td);
}

// Axis-aligned box around a mean vector.
struct Box {
  Eigen::VectorXd center;
  Eigen::VectorXd half_width;

  Eigen::VectorXd lower() const { return center - half_width; }
  Eigen::VectorXd upper() const { return center + half_width; }

  bool contains(const Eigen::Ref<const Eigen::VectorXd>& point) const {
    if (point.size() != center.size()) return false;
    return ((point - center).cwiseAbs().array() <= half_width.array()).all();
  }
};

// Multivariate confidence region mean + Sigma_hat^{1/2} C_t, where C_t is the
// cube with per-coordinate mixture radius at level alpha/d (union bound over
// coordinates). Returned as the bounding box of that parallelotope:
// half_width_j = r * sum_k |(Sigma_hat^{1/2})_{jk}|.
inline Box multivariate_cs(const numerics::CovMoments& cov, const Eigen::Ref<const Eigen::VectorXd>& mean,
                           const BoundarySpec& spec) {
  if (cov.count() < 2) throw DomainError("multivariate_cs: need at least two observations");
  if (mean.size() != cov.dim()) throw DomainError("multivariate_cs: dimension mismatch");
  spec.validate();
  const auto d = static_cast<double>(cov.dim());
  const double r = mixture_radius(cov.count(), 1.0, spec.alpha / d, spec.rho);
  const numerics::PsdMatrix root = numerics::psd_sqrt(cov.covariance());
  Box box;
  box.center = mean;
  box.half_width = r * root.entries().cwiseAbs().rowwise().sum();
  return box;
}

}  // namespace seqdr::boundaries
