#pragma once

// Simulated data-generating processes and a Monte Carlo harness measuring
// cumulative miscoverage, widths, and final-time behaviour of interval
// streams.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "seqdr/ate.hpp"
#include "seqdr/boundaries.hpp"
#include "seqdr/error.hpp"
#include "seqdr/io.hpp"
#include "seqdr/numerics/rng.hpp"
#include "seqdr/numerics/special.hpp"
#include "seqdr/observation.hpp"

namespace seqdr::simlab {

using boundaries::CsPoint;

enum class ScenarioKind { gaussian_mean, randomized_ate, observational_ate };
enum class Noise { t5, normal };

inline ScenarioKind parse_scenario(std::string_view name) {
  if (name == "gaussian" || name == "gaussian_mean") return ScenarioKind::gaussian_mean;
  if (name == "randomized" || name == "randomized_ate") return ScenarioKind::randomized_ate;
  if (name == "observational" || name == "observational_ate") return ScenarioKind::observational_ate;
  throw DomainError("unknown scenario: " + std::string(name));
}

inline std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::gaussian_mean: return "gaussian_mean";
    case ScenarioKind::randomized_ate: return "randomized_ate";
    case ScenarioKind::observational_ate: return "observational_ate";
  }
  return "unknown";
}

struct SimScenario {
  ScenarioKind kind = ScenarioKind::randomized_ate;
  std::uint64_t n = 4000;
  double psi_true = 1.0;
  Noise noise = Noise::t5;
  numerics::SeedSpec seed{};

  // N(0.4, 1) stream of the CS-versus-CI comparison.
  static SimScenario gaussian(std::uint64_t n = 5000, double mean = 0.4, std::uint64_t seed = 0) {
    return {ScenarioKind::gaussian_mean, n, mean, Noise::normal, {seed, 0}};
  }
  static SimScenario randomized(std::uint64_t n = 4000, std::uint64_t seed = 0) {
    return {ScenarioKind::randomized_ate, n, 1.0, Noise::t5, {seed, 0}};
  }
  static SimScenario observational(std::uint64_t n = 4000, std::uint64_t seed = 0) {
    return {ScenarioKind::observational_ate, n, 1.0, Noise::t5, {seed, 0}};
  }

  // The same scenario on the independent stream of replication `rep`.
  SimScenario replication(std::uint64_t rep) const {
    SimScenario s = *this;
    s.seed.stream_id = rep;
    return s;
  }
};

// Baseline regression 1 - x1^2 - 2 sin(x2) + 3 |x3|.
inline double mu_star(std::span<const double> x) {
  return 1.0 - x[0] * x[0] - 2.0 * std::sin(x[1]) + 3.0 * std::abs(x[2]);
}

// Treatment probability of the observational scenario, 0.2 + 0.6 expit(mu*(x)) in [0.2, 0.8].
inline double observational_propensity(std::span<const double> x) { return 0.2 + 0.6 * numerics::expit(mu_star(x)); }

// i-th record (1-based) of the scenario's stream; depends only on (seed, i).
inline Observation generate(const SimScenario& scenario, std::uint64_t i) {
  if (i == 0) throw DomainError("generate: index is 1-based");
  numerics::Rng rng(scenario.seed, i);
  Observation z;
  if (scenario.kind == ScenarioKind::gaussian_mean) {
    z.y = scenario.psi_true + rng.normal();
    return z;
  }
  z.x = {rng.normal(), rng.normal(), rng.normal()};
  double pi;
  if (scenario.kind == ScenarioKind::randomized_ate) {
    pi = 0.5;
    z.known_pi = pi;
  } else {
    pi = observational_propensity(z.x);
  }
  z.a = rng.bernoulli(pi) ? 1 : 0;
  const double eps = scenario.noise == Noise::t5 ? rng.student_t(5) : rng.normal();
  z.y = mu_star(z.x) + scenario.psi_true * z.a + eps;
  return z;
}

// Interval stream of one estimator over one replication, indexed by t - 1.
// NaN bounds mark times with no interval.
struct Trace {
  std::vector<double> estimate;
  std::vector<double> lower;
  std::vector<double> upper;

  explicit Trace(std::uint64_t horizon = 0)
      : estimate(horizon, std::numeric_limits<double>::quiet_NaN()),
        lower(horizon, std::numeric_limits<double>::quiet_NaN()),
        upper(horizon, std::numeric_limits<double>::quiet_NaN()) {}

  void record(std::uint64_t t, const CsPoint& p) {
    estimate[t - 1] = p.estimate;
    lower[t - 1] = p.lower;
    upper[t - 1] = p.upper;
  }

  bool emitted(std::uint64_t t) const { return !std::isnan(lower[t - 1]); }
};

struct MonteCarloReport {
  std::string label;
  std::uint64_t reps = 0;
  std::uint64_t horizon = 0;
  std::uint64_t start_time = 1;
  double truth = 0.0;
  // Indexed by t - 1.
  std::vector<double> cumulative_miscoverage_by_t;
  std::vector<double> mean_width_by_t;     // NaN where no replication reported
  std::vector<double> mean_estimate_by_t;  // NaN where no replication reported
  // Fraction of replications whose last reported interval contains the truth.
  double coverage_final = 0.0;
  // Per replication, at the last reported time (NaN if it never reported).
  std::vector<double> final_estimate;
  std::vector<double> final_width;
  std::vector<std::uint8_t> ever_miscovered;

  double uniform_coverage() const {
    return cumulative_miscoverage_by_t.empty() ? 1.0 : 1.0 - cumulative_miscoverage_by_t.back();
  }
};

namespace detail {

struct Accumulator {
  std::vector<std::uint64_t> miscovered_by_t;  // first miss at t
  std::vector<double> width_sum;
  std::vector<double> estimate_sum;
  std::vector<std::uint64_t> emitted;

  explicit Accumulator(std::uint64_t horizon)
      : miscovered_by_t(horizon, 0), width_sum(horizon, 0.0), estimate_sum(horizon, 0.0), emitted(horizon, 0) {}

  void add(const Accumulator& o) {
    for (std::size_t i = 0; i < width_sum.size(); ++i) {
      miscovered_by_t[i] += o.miscovered_by_t[i];
      width_sum[i] += o.width_sum[i];
      estimate_sum[i] += o.estimate_sum[i];
      emitted[i] += o.emitted[i];
    }
  }
};

}  // namespace detail

// Runs `reps` replications. `runner(rep)` returns one Trace per estimator, all
// of length `horizon`. A replication counts as miscovered at t when the truth
// fell outside any interval reported at a time in [start_time, t].
// Replications run in fixed blocks that are reduced in block order, so the
// report does not depend on the number of threads.
inline std::vector<MonteCarloReport> run_monte_carlo(std::uint64_t reps, std::uint64_t horizon, double truth,
                                                     std::uint64_t start_time, std::size_t n_estimators,
                                                     const std::function<std::vector<Trace>(std::uint64_t)>& runner,
                                                     unsigned threads = 0) {
  if (reps == 0) throw DomainError("run_monte_carlo: reps must be >= 1");
  if (horizon == 0) throw DomainError("run_monte_carlo: horizon must be >= 1");
  constexpr std::uint64_t kBlock = 8;
  const std::uint64_t n_blocks = (reps + kBlock - 1) / kBlock;

  std::vector<std::vector<detail::Accumulator>> blocks(
      n_blocks, std::vector<detail::Accumulator>(n_estimators, detail::Accumulator(0)));
  std::vector<MonteCarloReport> reports(n_estimators);
  for (auto& r : reports) {
    r.reps = reps;
    r.horizon = horizon;
    r.start_time = start_time;
    r.truth = truth;
    r.final_estimate.assign(reps, std::numeric_limits<double>::quiet_NaN());
    r.final_width.assign(reps, std::numeric_limits<double>::quiet_NaN());
    r.ever_miscovered.assign(reps, 0);
  }
  std::vector<std::uint8_t> final_covers(reps * n_estimators, 0);

  std::atomic<std::uint64_t> next_block{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    try {
      for (std::uint64_t b = next_block++; b < n_blocks && !failed; b = next_block++) {
        std::vector<detail::Accumulator> acc(n_estimators, detail::Accumulator(horizon));
        for (std::uint64_t rep = b * kBlock; rep < std::min(reps, (b + 1) * kBlock); ++rep) {
          const std::vector<Trace> traces = runner(rep);
          if (traces.size() != n_estimators) throw DomainError("run_monte_carlo: wrong number of traces");
          for (std::size_t e = 0; e < n_estimators; ++e) {
            const Trace& tr = traces[e];
            if (tr.lower.size() != horizon) throw DomainError("run_monte_carlo: trace length mismatch");
            bool missed = false;
            std::optional<std::uint64_t> last;
            for (std::uint64_t t = start_time; t <= horizon; ++t) {
              if (!tr.emitted(t)) continue;
              last = t;
              const double lo = tr.lower[t - 1];
              const double hi = tr.upper[t - 1];
              acc[e].width_sum[t - 1] += hi - lo;
              acc[e].estimate_sum[t - 1] += tr.estimate[t - 1];
              ++acc[e].emitted[t - 1];
              if (!missed && !(lo <= truth && truth <= hi)) {
                missed = true;
                ++acc[e].miscovered_by_t[t - 1];
              }
            }
            auto& rep_out = reports[e];
            rep_out.ever_miscovered[rep] = missed ? 1 : 0;
            if (last) {
              const std::uint64_t t = *last;
              rep_out.final_estimate[rep] = tr.estimate[t - 1];
              rep_out.final_width[rep] = tr.upper[t - 1] - tr.lower[t - 1];
              final_covers[rep * n_estimators + e] = tr.lower[t - 1] <= truth && truth <= tr.upper[t - 1];
            }
          }
        }
        blocks[b] = std::move(acc);
      }
    } catch (...) {
      if (!failed.exchange(true)) failure = std::current_exception();
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, n_blocks));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t e = 0; e < n_estimators; ++e) {
    detail::Accumulator total(horizon);
    for (const auto& block : blocks) total.add(block[e]);
    auto& r = reports[e];
    r.cumulative_miscoverage_by_t.resize(horizon);
    r.mean_width_by_t.resize(horizon);
    r.mean_estimate_by_t.resize(horizon);
    std::uint64_t running = 0;
    for (std::uint64_t i = 0; i < horizon; ++i) {
      running += total.miscovered_by_t[i];
      r.cumulative_miscoverage_by_t[i] = static_cast<double>(running) / static_cast<double>(reps);
      const auto m = static_cast<double>(total.emitted[i]);
      r.mean_width_by_t[i] = total.emitted[i] ? total.width_sum[i] / m : std::numeric_limits<double>::quiet_NaN();
      r.mean_estimate_by_t[i] =
          total.emitted[i] ? total.estimate_sum[i] / m : std::numeric_limits<double>::quiet_NaN();
    }
    std::uint64_t covered = 0;
    for (std::uint64_t rep = 0; rep < reps; ++rep) covered += final_covers[rep * n_estimators + e];
    r.coverage_final = static_cast<double>(covered) / static_cast<double>(reps);
  }
  return reports;
}

// Asymptotic CS (running sample standard deviation) and the fixed-time CLT
// interval, both evaluated at every t on the same Gaussian stream.
inline std::vector<Trace> gaussian_traces(const SimScenario& scenario, std::uint64_t rep,
                                          const boundaries::BoundarySpec& spec) {
  const SimScenario s = scenario.replication(rep);
  Trace cs(s.n);
  Trace ci(s.n);
  numerics::RunningMoments m;
  for (std::uint64_t t = 1; t <= s.n; ++t) {
    m.push(generate(s, t).y);
    const double sd = m.stddev();
    cs.record(t, CsPoint::make(t, m.mean(), boundaries::radius(t, m.variance(), spec), m.variance()));
    ci.record(t, CsPoint::make(t, m.mean(), boundaries::fixed_ci_radius(t, sd, spec.alpha), m.variance()));
  }
  return {std::move(cs), std::move(ci)};
}

// One ATE estimator in a comparison.
struct EstimatorSpec {
  enum class Kind { unadjusted, doubly_robust } kind = Kind::doubly_robust;
  std::string label;
  ate::EngineConfig config;

  static EstimatorSpec unadjusted(ate::EngineConfig config, std::string label = "unadjusted") {
    return {Kind::unadjusted, std::move(label), std::move(config)};
  }
  static EstimatorSpec doubly_robust(ate::EngineConfig config, std::string label) {
    return {Kind::doubly_robust, std::move(label), std::move(config)};
  }
};

// Split coins for replication `rep` never share a stream with the data.
inline std::uint64_t split_seed(const SimScenario& scenario, std::uint64_t rep) {
  std::uint64_t sm = scenario.seed.master_seed ^ 0xA076BEEF5EEDULL;
  numerics::splitmix64(sm);
  sm ^= rep;
  return numerics::splitmix64(sm);
}

inline std::vector<Trace> ate_traces(const SimScenario& scenario, std::uint64_t rep,
                                     const std::vector<EstimatorSpec>& estimators) {
  const SimScenario s = scenario.replication(rep);
  std::vector<Trace> traces(estimators.size(), Trace(s.n));
  std::vector<std::optional<ate::UnadjustedEstimator>> unadjusted(estimators.size());
  std::vector<std::optional<ate::AteEngine>> engines(estimators.size());
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    const auto& cfg = estimators[e].config;
    if (estimators[e].kind == EstimatorSpec::Kind::unadjusted) {
      unadjusted[e].emplace(cfg.mode, cfg.boundary, cfg.t_min);
    } else {
      ate::EngineConfig c = cfg;
      c.seed = split_seed(scenario, rep);
      engines[e].emplace(std::move(c));
    }
  }
  for (std::uint64_t t = 1; t <= s.n; ++t) {
    const Observation z = generate(s, t);
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      std::optional<CsPoint> p;
      if (unadjusted[e]) {
        unadjusted[e]->push(z);
        p = unadjusted[e]->point();
      } else {
        p = engines[e]->update(z).point;
      }
      if (p) traces[e].record(t, *p);
    }
  }
  return traces;
}

// Gaussian scenario: [asymptotic CS, fixed-time CI] reports with the CS
// tuned for 5 * start_time. ATE scenarios: one report per estimator.
inline std::vector<MonteCarloReport> run_miscoverage(const SimScenario& scenario,
                                                     const std::vector<EstimatorSpec>& estimators,
                                                     std::uint64_t reps, std::uint64_t start_time, double alpha,
                                                     unsigned threads = 0) {
  if (scenario.kind == ScenarioKind::gaussian_mean) {
    const boundaries::BoundarySpec spec{
        alpha, boundaries::tune_rho(alpha, 5 * start_time, boundaries::RhoMethod::exact)};
    auto reports = run_monte_carlo(
        reps, scenario.n, scenario.psi_true, start_time, 2,
        [&](std::uint64_t rep) { return gaussian_traces(scenario, rep, spec); }, threads);
    reports[0].label = "confidence_sequence";
    reports[1].label = "fixed_time_ci";
    return reports;
  }
  auto reports = run_monte_carlo(
      reps, scenario.n, scenario.psi_true, start_time, estimators.size(),
      [&](std::uint64_t rep) { return ate_traces(scenario, rep, estimators); }, threads);
  for (std::size_t e = 0; e < estimators.size(); ++e) reports[e].label = estimators[e].label;
  return reports;
}

struct WidthRow {
  std::uint64_t t_opt = 0;
  std::uint64_t t = 0;
  double rho = 0.0;
  double cs_radius = 0.0;
  double ci_radius = 0.0;
  double ratio = 0.0;  // CS width / CI width
};

inline std::vector<std::uint64_t> default_width_grid() {
  std::vector<std::uint64_t> grid;
  for (std::uint64_t decade = 1; decade <= 100000; decade *= 10)
    for (std::uint64_t m : {1, 2, 5}) grid.push_back(m * decade);
  return grid;
}

// Ratio of the normal-mixture CS radius (rho tuned exactly for each t_opt) to
// the fixed-time CI radius, over a grid of times. Each t_opt is added to the grid.
inline std::vector<WidthRow> width_table(double alpha, const std::vector<std::uint64_t>& t_opts,
                                         std::vector<std::uint64_t> t_grid = {}) {
  if (t_grid.empty()) t_grid = default_width_grid();
  std::vector<WidthRow> rows;
  for (std::uint64_t t_opt : t_opts) {
    const double rho = boundaries::tune_rho(alpha, t_opt, boundaries::RhoMethod::exact);
    std::vector<std::uint64_t> grid = t_grid;
    grid.push_back(t_opt);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (std::uint64_t t : grid) {
      if (t == 0) continue;
      WidthRow row{t_opt, t, rho, boundaries::mixture_radius(t, 1.0, alpha, rho),
                   boundaries::fixed_ci_radius(t, 1.0, alpha), 0.0};
      row.ratio = row.cs_radius / row.ci_radius;
      rows.push_back(row);
    }
  }
  return rows;
}

// One row per t: t,cum_miscoverage,mean_width,mean_estimate. Times with no
// interval in any replication leave the last two columns empty.
inline void write_report_csv(std::ostream& out, const MonteCarloReport& report) {
  out << "t,cum_miscoverage,mean_width,mean_estimate\n";
  for (std::uint64_t i = 0; i < report.horizon; ++i) {
    out << (i + 1) << ',' << io::format_number(report.cumulative_miscoverage_by_t[i]) << ',';
    if (!std::isnan(report.mean_width_by_t[i]))
      out << io::format_number(report.mean_width_by_t[i]) << ',' << io::format_number(report.mean_estimate_by_t[i]);
    else
      out << ',';
    out << '\n';
  }
}

inline double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return std::isnan(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline nlohmann::json report_summary(const MonteCarloReport& r) {
  // Rounded to the 9 significant digits used everywhere else in the output.
  auto num = [](double v) {
    return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(std::stod(io::format_number(v)));
  };
  std::uint64_t ever = 0;
  for (auto m : r.ever_miscovered) ever += m;
  return {{"label", r.label},
          {"reps", r.reps},
          {"horizon", r.horizon},
          {"start_time", r.start_time},
          {"truth", num(r.truth)},
          {"cumulative_miscoverage", num(r.cumulative_miscoverage_by_t.back())},
          {"uniform_coverage", num(r.uniform_coverage())},
          {"coverage_final", num(r.coverage_final)},
          {"median_final_width", num(median(r.final_width))},
          {"mean_final_estimate", num(r.mean_estimate_by_t.back())},
          {"reps_ever_miscovered", ever}};
}

inline void write_summary_json(std::ostream& out, const std::vector<MonteCarloReport>& reports) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(report_summary(r));
  out << j.dump(2) << '\n';
}

}  // namespace seqdr::simlab
