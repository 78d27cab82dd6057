// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "seqdr/seqdr.hpp"

using namespace seqdr;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void run(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.check(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.check(secs < limit_s, "runtime " + fmt("%.2f", secs) + "s < " + fmt("%g", limit_s) + "s");
  if (!out.pass) ++failures;
  std::printf("[%s] criterion %2d %-22s %s\n", out.pass ? "PASS" : "FAIL", id, name, out.detail.c_str());
  std::fflush(stdout);
}

double median_of(std::vector<double> v) { return simlab::median(std::move(v)); }

Eigen::MatrixXd random_psd(std::mt19937_64& gen, int dim, int rank) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(dim, rank);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < rank; ++j) g(i, j) = n01(gen);
  return g * g.transpose();
}

// Largest singular value, computed independently of the library's eigensolver path.
double svd_norm(const Eigen::MatrixXd& m) { return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0); }

ate::EngineConfig engine_config(double alpha, ate::DesignMode mode, nuisance::LearnerSpec outcome, bool crossfit) {
  ate::EngineConfig c;
  c.boundary = {alpha, ate::default_rho(alpha)};
  c.mode = mode;
  c.crossfit = crossfit;
  c.scoring = ate::Scoring::batch;
  c.nuisance.outcome = std::move(outcome);
  c.nuisance.estimate_propensity = mode == ate::DesignMode::observational;
  return c;
}

Outcome lambert() {
  using numerics::LambertBranch;
  Outcome o;
  const double omega = numerics::lambert_w(LambertBranch::principal, 1.0);
  o.check(std::abs(omega - 0.567143) <= 1e-6, "W0(1)=" + fmt("%.9f", omega));
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double zl = -numerics::kInvE * std::pow(10.0, -12.0 * i / 199.0);
    const double zp = i < 50 ? -numerics::kInvE + 1e-12 * std::pow(10.0, i / 5.0)
                             : std::pow(10.0, -6.0 + 12.0 * (i - 50) / 149.0);
    for (auto [branch, z] : {std::pair{LambertBranch::lower, zl}, std::pair{LambertBranch::principal, zp}}) {
      const double w = numerics::lambert_w(branch, z);
      const bool right_side = branch == LambertBranch::lower ? w <= -1.0 : w >= -1.0;
      const double res = std::abs(w * std::exp(w) - z) / std::max(1.0, std::abs(z));
      worst = std::max(worst, right_side ? res : INFINITY);
    }
  }
  o.check(worst <= 1e-10, "max scaled residual " + fmt("%.2e", worst));
  return o;
}

Outcome quadrature() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t t : {1u, 5u, 10u, 100u})
    for (double rho : {0.1, 0.5, 1.0, 2.0})
      for (int w = -10; w <= 10; ++w) {
        const double closed = boundaries::mixture_martingale({t, double(w)}, rho);
        const double numeric = oracle::mixture_integral(double(t), w, rho);
        worst = std::max(worst, std::abs(closed - numeric) / closed);
      }
  o.check(worst <= 1e-6, "max rel err " + fmt("%.2e", worst));
  return o;
}

Outcome rho_tuning() {
  using boundaries::RhoMethod;
  Outcome o;
  const double approx = boundaries::tune_rho(0.05, 100, RhoMethod::approx);
  const double exact = boundaries::tune_rho(0.05, 100, RhoMethod::exact);
  o.check(std::abs(approx - 0.281661) <= 1e-5, "approx " + fmt("%.6f", approx));
  o.check(std::abs(exact - 0.28652) <= 1e-3, "exact " + fmt("%.6f", exact));
  // Independent location of the minimizer: bisection on the radius derivative.
  const double found = oracle::bisect(
      [](double rho) {
        const double h = 1e-6 * rho;
        return oracle::mixture_radius(100, 1.0, 0.05, rho + h) - oracle::mixture_radius(100, 1.0, 0.05, rho - h);
      },
      1e-3, 10.0, 100);
  o.check(std::abs(exact - found) <= 1e-3, "bisection " + fmt("%.6f", found));
  const double at = boundaries::mixture_radius(100, 1.0, 0.05, exact);
  const bool local = at <= boundaries::mixture_radius(100, 1.0, 0.05, 0.9 * exact) &&
                     at <= boundaries::mixture_radius(100, 1.0, 0.05, 1.1 * exact);
  o.check(local, "local minimum at 0.9x/1.1x");
  return o;
}

Outcome width_ratio() {
  Outcome o;
  double at_opt = NAN;
  for (const auto& r : simlab::width_table(0.05, {100}, {100})) at_opt = r.ratio;
  o.check(std::abs(at_opt - 1.549) <= 0.005, "ratio(0.05) " + fmt("%.4f", at_opt));
  double worst = 0.0;
  for (double alpha : {0.01, 0.05, 0.1, 0.2})
    for (const auto& r : simlab::width_table(alpha, {100}, {100})) worst = std::max(worst, r.ratio);
  o.check(worst < 2.0, "max ratio over alphas " + fmt("%.4f", worst));
  return o;
}

Outcome gaussian_coverage() {
  Outcome o;
  const auto reports = simlab::run_miscoverage(simlab::SimScenario::gaussian(5000, 0.4, 1), {}, 1000, 25, 0.1);
  const double cs = reports[0].cumulative_miscoverage_by_t.back();
  const double ci = reports[1].cumulative_miscoverage_by_t.back();
  o.check(cs <= 0.12, "CS miscoverage " + fmt("%.3f", cs));
  o.check(ci > 0.15, "CI miscoverage " + fmt("%.3f", ci));
  return o;
}

Outcome randomized_ate() {
  Outcome o;
  const double alpha = 0.1;
  const auto mode = ate::DesignMode::randomized;
  const std::vector<simlab::EstimatorSpec> est{
      simlab::EstimatorSpec::doubly_robust(
          engine_config(alpha, mode, nuisance::LearnerSpec::default_outcome_ensemble(), true), "ensemble"),
      simlab::EstimatorSpec::doubly_robust(engine_config(alpha, mode, nuisance::LearnerSpec::linear(), true),
                                           "linear"),
      simlab::EstimatorSpec::unadjusted(engine_config(alpha, mode, nuisance::LearnerSpec::mean_only(), false)),
  };
  const auto r = simlab::run_miscoverage(simlab::SimScenario::randomized(4000, 2), est, 200, 25, alpha);
  const double cov = r[0].uniform_coverage();
  const double we = median_of(r[0].final_width), wl = median_of(r[1].final_width), wu = median_of(r[2].final_width);
  o.check(cov >= 0.88, "ensemble uniform coverage " + fmt("%.3f", cov));
  o.check(we <= wl && wl <= wu, "median widths " + fmt("%.3f", we) + " <= " + fmt("%.3f", wl) + " <= " +
                                    fmt("%.3f", wu));
  return o;
}

Outcome observational_ate() {
  Outcome o;
  const double alpha = 0.1;
  const auto mode = ate::DesignMode::observational;
  const std::vector<simlab::EstimatorSpec> est{
      simlab::EstimatorSpec::doubly_robust(
          engine_config(alpha, mode, nuisance::LearnerSpec::default_outcome_ensemble(), true), "ensemble"),
      simlab::EstimatorSpec::unadjusted(engine_config(alpha, mode, nuisance::LearnerSpec::mean_only(), false)),
  };
  const auto r = simlab::run_miscoverage(simlab::SimScenario::observational(4000, 3), est, 200, 25, alpha);
  int worse = 0;
  for (std::size_t i = 0; i < r[0].reps; ++i)
    worse += std::abs(r[1].final_estimate[i] - 1.0) > std::abs(r[0].final_estimate[i] - 1.0);
  const double frac = double(worse) / double(r[0].reps);
  o.check(r[0].coverage_final >= 0.88, "ensemble final coverage " + fmt("%.3f", r[0].coverage_final));
  o.check(frac >= 0.80, "unadjusted worse in " + fmt("%.3f", frac));
  return o;
}

Outcome crossfit() {
  Outcome o;
  const auto base = engine_config(0.1, ate::DesignMode::randomized, nuisance::LearnerSpec::default_outcome_ensemble(), true);
  {
    ate::EngineConfig c = base;
    c.seed = 11;
    ate::AteEngine engine(c);
    const auto s = simlab::SimScenario::randomized(2000, 4);
    double worst = 0.0;
    int emissions = 0;
    for (std::uint64_t t = 1; t <= s.n; ++t) {
      engine.update(simlab::generate(s, t));
      const auto x = engine.crossfit_point();
      if (!x) continue;
      const auto& sa = engine.primary().scores();
      const auto& sb = engine.swapped().scores();
      const double a = std::accumulate(sa.begin(), sa.end(), 0.0) / double(sa.size());
      const double b = std::accumulate(sb.begin(), sb.end(), 0.0) / double(sb.size());
      worst = std::max(worst, std::abs(x->estimate - 0.5 * (a + b)));
      ++emissions;
    }
    o.check(emissions > 0 && worst <= 1e-12,
            "identity max gap " + fmt("%.1e", worst) + " over " + std::to_string(emissions) + " emissions");
  }
  int narrower = 0;
  const int reps = 100;
  const auto s = simlab::SimScenario::randomized(4000, 5);
  for (int rep = 0; rep < reps; ++rep) {
    ate::EngineConfig c = base;
    c.seed = simlab::split_seed(s, rep);
    ate::AteEngine engine(c);
    const auto sr = s.replication(rep);
    for (std::uint64_t t = 1; t <= sr.n; ++t) engine.update(simlab::generate(sr, t));
    const auto x = engine.crossfit_point(), a = engine.single_split_point();
    narrower += x && a && x->width() < a->width();
  }
  o.check(narrower >= 95, "cross-fit narrower in " + std::to_string(narrower) + "/100");
  return o;
}

Outcome double_robustness() {
  Outcome o;
  const std::vector<simlab::EstimatorSpec> est{simlab::EstimatorSpec::doubly_robust(
      engine_config(0.1, ate::DesignMode::randomized, nuisance::LearnerSpec::mean_only(), true), "mean_only")};
  const auto r = simlab::run_miscoverage(simlab::SimScenario::randomized(4000, 6), est, 200, 25, 0.1);
  int close = 0;
  for (double e : r[0].final_estimate) close += std::abs(e - 1.0) < 0.15;
  const double frac = double(close) / double(r[0].reps);
  o.check(frac >= 0.90, "|err|<0.15 in " + fmt("%.3f", frac));
  return o;
}

Outcome sqrt_holder() {
  Outcome o;
  std::mt19937_64 gen(2024);
  double worst = -INFINITY;
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = 1 + trial % 8;
    const Eigen::MatrixXd a = random_psd(gen, dim, 1 + (trial / 8) % dim);
    Eigen::MatrixXd b = random_psd(gen, dim, 1 + (trial / 3) % dim);
    if (trial % 4 == 0) b = a + 1e-6 * random_psd(gen, dim, 1);
    const double lhs = svd_norm(numerics::psd_sqrt(a).entries() - numerics::psd_sqrt(b).entries());
    const double rhs = std::sqrt(svd_norm(a - b));
    worst = std::max(worst, lhs - rhs);
  }
  o.check(worst <= 1e-8, "max excess " + fmt("%.2e", worst));
  double gap = 0.0;
  for (std::uint64_t t : {1u, 10u, 125u, 5000u})
    for (double alpha : {0.01, 0.1})
      for (double rho : {0.05, 0.5, 2.0}) {
        const boundaries::BoundarySpec spec{alpha, rho, boundaries::BoundaryFamily::non_iid};
        const double m = boundaries::mixture_radius(t, 1.0, alpha, rho);
        gap = std::max(gap, std::abs(boundaries::non_iid_radius(t, 1.0, spec) - m) / m);
      }
  o.check(gap <= 1e-12, "non-iid vs mixture rel gap " + fmt("%.1e", gap));
  return o;
}

}  // namespace

int main() {
  run(1, "lambert_w", 1, lambert);
  run(2, "mixture_quadrature", 10, quadrature);
  run(3, "rho_tuning", 1, rho_tuning);
  run(4, "width_ratio", 1, width_ratio);
  run(5, "gaussian_coverage", 180, gaussian_coverage);
  run(6, "randomized_ate", 600, randomized_ate);
  run(7, "observational_ate", 900, observational_ate);
  run(8, "crossfit", 120, crossfit);
  run(9, "double_robustness", 300, double_robustness);
  run(10, "sqrt_holder", 5, sqrt_holder);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
