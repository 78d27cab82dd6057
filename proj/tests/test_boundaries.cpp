#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "seqdr/boundaries.hpp"
#include "seqdr/numerics/rng.hpp"

using namespace seqdr;
using namespace seqdr::boundaries;

TEST(MixtureRadius, HandValue) {
  EXPECT_NEAR(mixture_radius(1, 1.0, 0.05, 1.0), 3.65636, 1e-4);
  EXPECT_NEAR(mixture_radius(1, 1.0, 0.05, 1.0), oracle::mixture_radius(1, 1, 0.05, 1), 1e-14);
}

TEST(MixtureRadius, ZeroSigmaAndLinearScaling) {
  EXPECT_EQ(mixture_radius(10, 0.0, 0.05, 0.7), 0.0);
  for (std::uint64_t t : {1u, 7u, 1000u})
    EXPECT_NEAR(mixture_radius(t, 2.0, 0.1, 0.3), 2.0 * mixture_radius(t, 1.0, 0.1, 0.3), 1e-15);
}

TEST(MixtureRadius, StrictlyDecreasingInTime) {
  double prev = mixture_radius(1, 1.0, 0.05, 0.5);
  for (std::uint64_t t = 2; t < 20000; t = t * 11 / 10 + 1) {
    const double r = mixture_radius(t, 1.0, 0.05, 0.5);
    EXPECT_LT(r, prev) << t;
    prev = r;
  }
}

TEST(MixtureRadius, DomainErrors) {
  EXPECT_THROW(mixture_radius(0, 1.0, 0.05, 1.0), DomainError);
  EXPECT_THROW(mixture_radius(1, -1.0, 0.05, 1.0), DomainError);
  EXPECT_THROW(mixture_radius(1, 1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(mixture_radius(1, 1.0, 0.05, 0.0), DomainError);
}

TEST(LilRadius, Values) {
  EXPECT_NEAR(lil_radius(2, 1.0, 0.05), 2.30305, 1e-4);
  EXPECT_EQ(lil_radius(5, 0.0, 0.05), 0.0);
  EXPECT_LT(lil_radius(1000000, 1.0, 0.05), lil_radius(1000, 1.0, 0.05));
  EXPECT_THROW(lil_radius(0, 1.0, 0.05), DomainError);
  double prev = lil_radius(2, 1.0, 0.05);
  for (std::uint64_t t = 3; t < 100000; t *= 3) {
    EXPECT_LT(lil_radius(t, 1.0, 0.05), prev);
    prev = lil_radius(t, 1.0, 0.05);
  }
}

TEST(NonIidRadius, ReducesToMixtureAtUnitVariance) {
  EXPECT_NEAR(non_iid_radius(1, 1.0, {0.05, 1.0}), 3.65636, 1e-4);
  for (std::uint64_t t : {1u, 2u, 50u, 12345u})
    for (double rho : {0.1, 0.5, 2.0})
      EXPECT_NEAR(non_iid_radius(t, 1.0, {0.1, rho}), mixture_radius(t, 1.0, 0.1, rho),
                  1e-14 * mixture_radius(t, 1.0, 0.1, rho));
}

TEST(NonIidRadius, DegenerateVariance) {
  const double rho = 0.4;
  for (std::uint64_t t : {1u, 10u})
    EXPECT_NEAR(non_iid_radius(t, 0.0, {0.05, rho}), std::sqrt(2.0 / (rho * rho) * std::log(1.0 / 0.05)) / t, 1e-14);
}

TEST(NonIidRadius, IndependentEvaluation) {
  const double t = 100, s2 = 2, rho = 0.3, alpha = 0.1;
  const double a = t * s2 * rho * rho + 1.0;
  const double expected = (1.0 / t) * std::sqrt(2.0 * a / (rho * rho) * std::log(std::sqrt(a) / alpha));
  EXPECT_NEAR(non_iid_radius(100, 2.0, {alpha, rho}), expected, 1e-8);
  EXPECT_THROW(non_iid_radius(0, 1.0, {0.1, 1.0}), DomainError);
}

TEST(Radius, DispatchesOnFamily) {
  BoundarySpec spec{0.05, 0.5};
  EXPECT_DOUBLE_EQ(radius(40, 4.0, spec), mixture_radius(40, 2.0, spec));
  spec.family = BoundaryFamily::lil;
  EXPECT_DOUBLE_EQ(radius(40, 4.0, spec), lil_radius(40, 2.0, 0.05));
  spec.family = BoundaryFamily::non_iid;
  EXPECT_DOUBLE_EQ(radius(40, 4.0, spec), non_iid_radius(40, 4.0, spec));
  EXPECT_EQ(parse_family("lil"), BoundaryFamily::lil);
  EXPECT_THROW(parse_family("bogus"), DomainError);
}

TEST(FixedCi, Values) {
  EXPECT_NEAR(fixed_ci_radius(100, 1.0, 0.05), 0.195996, 1e-5);
  EXPECT_EQ(fixed_ci_radius(100, 0.0, 0.05), 0.0);
  EXPECT_NEAR(fixed_ci_radius(400, 1.0, 0.05), fixed_ci_radius(100, 1.0, 0.05) / 2.0, 1e-15);
  EXPECT_THROW(fixed_ci_radius(0, 1.0, 0.05), DomainError);
}

TEST(MixtureMartingale, HandValues) {
  EXPECT_DOUBLE_EQ(mixture_martingale({3, 0.0}, 1.0), 0.5);
  for (double rho : {0.1, 1.0, 7.0}) EXPECT_DOUBLE_EQ(mixture_martingale({0, 0.0}, rho), 1.0);
}

TEST(MixtureMartingale, PushAccumulates) {
  MartingaleState s;
  EXPECT_EQ(s.t, 0u);
  EXPECT_EQ(s.w, 0.0);
  s.push(1.5);
  s.push(-0.5);
  EXPECT_EQ(s.t, 2u);
  EXPECT_DOUBLE_EQ(s.w, 1.0);
}

TEST(MixtureMartingale, MatchesQuadratureAtSpecPoint) {
  const double closed = mixture_martingale({10, 5.0}, 0.5);
  EXPECT_NEAR(closed, oracle::mixture_integral(10, 5.0, 0.5), 1e-6 * closed);
}

TEST(MixtureMartingale, MatchesQuadratureOverGrid) {
  for (std::uint64_t t : {1u, 5u, 10u, 100u})
    for (double rho : {0.1, 0.5, 1.0, 2.0})
      for (int w = -10; w <= 10; ++w) {
        const double closed = mixture_martingale({t, static_cast<double>(w)}, rho);
        const double numeric = oracle::mixture_integral(static_cast<double>(t), w, rho);
        EXPECT_NEAR(closed, numeric, 1e-6 * closed) << "t=" << t << " rho=" << rho << " w=" << w;
      }
}

// The radius is where the mixture martingale of the standardized sum reaches 1/alpha.
TEST(MixtureRadius, CrossesThresholdExactly) {
  for (std::uint64_t t : {1u, 10u, 250u, 10000u})
    for (double rho : {0.05, 0.3, 1.5})
      for (double sigma : {0.5, 1.0, 3.0}) {
        const double alpha = 0.05;
        const double r = mixture_radius(t, sigma, alpha, rho);
        const double w = static_cast<double>(t) * r / sigma;
        EXPECT_NEAR(mixture_martingale({t, w}, rho), 1.0 / alpha, 1e-9 / alpha);
        EXPECT_NEAR(mixture_martingale({t, -w}, rho), 1.0 / alpha, 1e-9 / alpha);
        EXPECT_LT(mixture_martingale({t, 0.99 * w}, rho), 1.0 / alpha);
      }
}

TEST(TuneRho, SpecValues) {
  EXPECT_NEAR(tune_rho(0.05, 100, RhoMethod::approx), 0.281661, 1e-5);
  EXPECT_NEAR(tune_rho(0.05, 100, RhoMethod::exact), 0.28652, 1e-3);
}

TEST(TuneRho, ExactIsStationaryPointByBisection) {
  // d/d rho of the radius at t*, located by bisection on a central difference.
  for (double alpha : {0.01, 0.05, 0.1, 0.3}) {
    const std::uint64_t t_star = 100;
    auto deriv = [&](double rho) {
      const double h = 1e-6 * rho;
      return mixture_radius(t_star, 1.0, alpha, rho + h) - mixture_radius(t_star, 1.0, alpha, rho - h);
    };
    const double oracle_rho = oracle::bisect(deriv, 1e-3, 10.0, 100);
    const double rho = tune_rho(alpha, t_star, RhoMethod::exact);
    // The closed form carries an extra exp(alpha^2) inside W, so it sits a
    // little off the numerical stationary point as alpha grows; the radius
    // itself is flat there to second order.
    EXPECT_NEAR(rho, oracle_rho, 1e-3 * std::max(1.0, 100 * alpha * alpha)) << alpha;
    const double best = mixture_radius(t_star, 1.0, alpha, oracle_rho);
    EXPECT_NEAR(mixture_radius(t_star, 1.0, alpha, rho), best, 1e-4 * best) << alpha;
  }
}

TEST(TuneRho, LocalMinimum) {
  for (double alpha : {0.01, 0.05, 0.1, 0.2})
    for (std::uint64_t t_star : {10u, 100u, 5000u}) {
      const double rho = tune_rho(alpha, t_star, RhoMethod::exact);
      const double at = mixture_radius(t_star, 1.0, alpha, rho);
      EXPECT_LE(at, mixture_radius(t_star, 1.0, alpha, 0.9 * rho));
      EXPECT_LE(at, mixture_radius(t_star, 1.0, alpha, 1.1 * rho));
    }
}

TEST(TuneRho, ScalesAsInverseRootT) {
  for (auto method : {RhoMethod::exact, RhoMethod::approx})
    for (std::uint64_t t : {1u, 25u, 1000u})
      EXPECT_NEAR(tune_rho(0.05, 4 * t, method), tune_rho(0.05, t, method) / 2.0, 1e-14);
}

TEST(TuneRho, DomainErrors) {
  EXPECT_THROW(tune_rho(0.76, 100, RhoMethod::exact), DomainError);
  EXPECT_NO_THROW(tune_rho(0.75, 100, RhoMethod::exact));
  EXPECT_THROW(tune_rho(0.05, 0, RhoMethod::exact), DomainError);
  EXPECT_THROW(tune_rho(0.0, 10, RhoMethod::approx), DomainError);
  EXPECT_EQ(parse_rho_method("approx"), RhoMethod::approx);
  EXPECT_THROW(parse_rho_method("nope"), DomainError);
}

TEST(CsPoint, Construction) {
  const CsPoint p = CsPoint::make(10, 1.5, 0.25, 2.0);
  EXPECT_EQ(p.lower, 1.25);
  EXPECT_EQ(p.upper, 1.75);
  EXPECT_TRUE(p.contains(1.5));
  EXPECT_FALSE(p.contains(1.8));
  EXPECT_DOUBLE_EQ(p.width(), 0.5);
}

TEST(Multivariate, OneDimensionReducesToMixture) {
  numerics::CovMoments cov;
  numerics::Rng rng({8, 8});
  for (int i = 0; i < 50; ++i) cov.push(Eigen::VectorXd::Constant(1, 2.0 * rng.normal()));
  const BoundarySpec spec{0.1, 0.4};
  const Box box = multivariate_cs(cov, cov.mean(), spec);
  const double sigma = std::sqrt(cov.covariance_matrix()(0, 0));
  EXPECT_NEAR(box.half_width(0), mixture_radius(50, sigma, spec), 1e-12);
  EXPECT_TRUE(box.contains(cov.mean()));
}

TEST(Multivariate, IdentityCovarianceSplitsAlpha) {
  // Four points with identity covariance: (+-1, +-1).
  numerics::CovMoments cov;
  for (double a : {-1.0, 1.0})
    for (double b : {-1.0, 1.0}) cov.push(Eigen::Vector2d(a, b));
  const BoundarySpec spec{0.1, 0.7};
  const Box box = multivariate_cs(cov, cov.mean(), spec);
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(box.half_width(j), mixture_radius(4, 1.0, 0.05, 0.7), 1e-12);
}

TEST(Multivariate, Errors) {
  numerics::CovMoments cov;
  cov.push(Eigen::Vector2d(1, 2));
  EXPECT_THROW(multivariate_cs(cov, Eigen::Vector2d(0, 0), {}), DomainError);
  cov.push(Eigen::Vector2d(2, 1));
  EXPECT_THROW(multivariate_cs(cov, Eigen::Vector3d(0, 0, 0), {}), DomainError);
}

TEST(Multivariate, GaussianJointCoverage) {
  const double alpha = 0.1;
  const BoundarySpec spec{alpha, tune_rho(alpha, 125, RhoMethod::exact)};
  Eigen::Matrix3d l;
  l << 1.0, 0.0, 0.0, 0.5, 1.0, 0.0, -0.3, 0.2, 0.8;
  const Eigen::Vector3d mu(0.4, -1.0, 2.0);
  int covered = 0;
  const int reps = 500;
  for (int rep = 0; rep < reps; ++rep) {
    numerics::Rng rng({77, static_cast<std::uint64_t>(rep)});
    numerics::CovMoments cov;
    bool ok = true;
    for (int t = 1; t <= 1000; ++t) {
      const Eigen::Vector3d g(rng.normal(), rng.normal(), rng.normal());
      cov.push(mu + l * g);
      if (t >= 25 && !multivariate_cs(cov, cov.mean(), spec).contains(mu)) {
        ok = false;
        break;
      }
    }
    covered += ok;
  }
  EXPECT_GE(covered / static_cast<double>(reps), 0.9);
}

// Known-variance mixture CS on N(0.4, 1) streams, monitored from t = 25.
TEST(MixtureRadius, KnownSigmaGaussianCoverage) {
  const double alpha = 0.1;
  const double rho = tune_rho(alpha, 125, RhoMethod::exact);
  const int reps = 1000;
  int missed = 0;
  for (int rep = 0; rep < reps; ++rep) {
    numerics::Rng rng({314, static_cast<std::uint64_t>(rep)});
    double sum = 0.0;
    for (std::uint64_t t = 1; t <= 5000; ++t) {
      sum += 0.4 + rng.normal();
      if (t >= 25 && std::abs(sum / t - 0.4) > mixture_radius(t, 1.0, alpha, rho)) {
        ++missed;
        break;
      }
    }
  }
  const double rate = missed / static_cast<double>(reps);
  const double mc_se = std::sqrt(alpha * (1 - alpha) / reps);
  EXPECT_LE(rate, alpha + 2 * mc_se);
}
