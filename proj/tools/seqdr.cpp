#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqdr/seqdr.hpp"

using namespace seqdr;
namespace fs = std::filesystem;

namespace {

using io::format_number;

struct MonitorOptions {
  double alpha = 0.1;
  std::optional<double> rho;
  std::optional<std::uint64_t> opt_t;
  std::string mode = "randomized";
  bool crossfit = false;
  std::string scoring = "online";
  std::string refit = "doubling";
  std::string split = "bernoulli";
  std::string learner = "ensemble";
  std::string config_path;
  std::string input = "-";
  std::string schema = "0";
  std::string out = "-";
  std::string audit_path;
  std::uint64_t seed = 0;
  std::uint64_t t_min = ate::kDefaultTMin;
  bool skip_bad = false;
};

struct SimulateOptions {
  std::string scenario = "randomized";
  std::uint64_t n = 4000;
  std::uint64_t reps = 100;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  std::uint64_t start = ate::kDefaultTMin;
  bool crossfit = false;
  unsigned threads = 0;
  std::string out = "simulate_out";
};

// The environment overrides the command line so a batch driver can pin runs.
std::uint64_t effective_seed(std::uint64_t flag) {
  if (const char* env = std::getenv("SEQDR_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw DomainError("SEQDR_SEED must be a non-negative integer");
  }
  return flag;
}

// key=value lines; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (io::is_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(number, "config: expected key=value");
    kv[std::string(io::detail::trim(line.substr(0, eq)))] = std::string(io::detail::trim(line.substr(eq + 1)));
  }
  return kv;
}

nuisance::LearnerSpec outcome_learner(const std::string& name, int k) {
  using nuisance::LearnerSpec;
  if (name == "mean" || name == "mean_only") return LearnerSpec::mean_only();
  if (name == "linear") return LearnerSpec::linear();
  if (name == "knn") return LearnerSpec::knn(k);
  if (name == "additive") return LearnerSpec::additive();
  if (name == "ensemble") return LearnerSpec::default_outcome_ensemble(k);
  throw DomainError("unknown learner: " + name);
}

nuisance::LearnerSpec propensity_learner(const std::string& name, int k) {
  using nuisance::LearnerSpec;
  if (name == "mean" || name == "mean_only") return LearnerSpec::mean_only();
  if (name == "linear" || name == "logistic") return LearnerSpec::logistic();
  if (name == "knn") return LearnerSpec::knn(k);
  if (name == "additive") return LearnerSpec::additive();
  if (name == "ensemble") return LearnerSpec::default_propensity_ensemble(k);
  throw DomainError("unknown learner: " + name);
}

double resolve_rho(double alpha, std::optional<double> rho, std::optional<std::uint64_t> opt_t) {
  if (rho.has_value() == opt_t.has_value()) throw DomainError("give exactly one of --rho and --opt-t");
  if (rho) {
    if (!(*rho > 0.0)) throw DomainError("--rho must be positive");
    return *rho;
  }
  return boundaries::tune_rho(alpha, *opt_t, boundaries::RhoMethod::exact);
}

// Opens `path` for writing, with "-" meaning stdout.
struct Sink {
  std::ofstream file;
  std::ostream* stream = &std::cout;

  explicit Sink(const std::string& path) {
    if (path == "-") return;
    file.open(path);
    if (!file) throw DomainError("cannot open output file " + path);
    stream = &file;
  }
  std::ostream& operator*() { return *stream; }
};

int run_monitor(const MonitorOptions& o) {
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw DomainError("--alpha must lie in (0, 1)");
  ate::EngineConfig config;
  config.boundary = {o.alpha, resolve_rho(o.alpha, o.rho, o.opt_t)};
  config.mode = ate::parse_design_mode(o.mode);
  config.crossfit = o.crossfit;
  config.scoring = ate::parse_scoring(o.scoring);
  config.refit = ate::parse_refit_schedule(o.refit);
  config.split = splitting::parse_split_mode(o.split);
  config.seed = effective_seed(o.seed);
  config.t_min = o.t_min;

  std::string learner = o.learner;
  int k = 10;
  if (!o.config_path.empty()) {
    for (const auto& [key, value] : read_config(o.config_path)) {
      if (key == "learner") {
        learner = value;
      } else if (key == "knn.k") {
        k = std::stoi(value);
        if (k < 1) throw DomainError("knn.k must be >= 1");
      } else if (key == "clip.delta") {
        config.nuisance.clip_delta = std::stod(value);
        if (!(config.nuisance.clip_delta > 0.0 && config.nuisance.clip_delta < 0.5))
          throw DomainError("clip.delta must lie in (0, 0.5)");
      } else {
        throw DomainError("unknown config key: " + key);
      }
    }
  }
  config.nuisance.outcome = outcome_learner(learner, k);
  config.nuisance.propensity = propensity_learner(learner, k);

  const io::Schema schema = io::parse_schema(o.schema);
  std::ifstream file;
  std::istream* in = &std::cin;
  if (o.input != "-") {
    file.open(o.input);
    if (!file) throw DomainError("cannot open input file " + o.input);
    in = &file;
  }
  Sink out(o.out);
  std::optional<Sink> audit;
  if (!o.audit_path.empty()) audit.emplace(o.audit_path);

  ate::AteEngine engine(config);
  *out << "t,T,T_prime,psi_hat,lower,upper,radius,var_hat,status\n" << std::flush;
  if (audit) **audit << "t,eval\n";

  std::string line;
  std::size_t number = 0;
  std::size_t bad = 0;
  while (std::getline(*in, line)) {
    ++number;
    if (io::is_blank(line)) continue;
    ate::Emission e;
    try {
      const Observation z = io::parse_observation(line, schema, number);
      try {
        e = engine.update(z);
      } catch (const DataError& err) {
        throw ParseError(number, err.what());
      }
    } catch (const ParseError& err) {
      ++bad;
      std::cerr << "seqdr monitor: " << err.what() << '\n';
      continue;
    }
    std::ostream& os = *out;
    os << e.t << ',' << e.t_eval << ',' << e.t_train << ',';
    if (e.point) {
      const auto& p = *e.point;
      os << format_number(p.estimate) << ',' << format_number(p.lower) << ',' << format_number(p.upper) << ','
         << format_number(p.radius) << ',' << format_number(p.var_hat) << ',';
    } else {
      os << ",,,,,";
    }
    os << ate::to_string(e.status) << '\n' << std::flush;
    if (audit) **audit << e.t << ',' << (e.split == splitting::Split::eval ? 1 : 0) << '\n';
  }
  if (bad > 0) std::cerr << "seqdr monitor: " << bad << " malformed row(s)\n";
  return bad > 0 && !o.skip_bad ? 1 : 0;
}

int run_simulate(const SimulateOptions& o) {
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw DomainError("--alpha must lie in (0, 1)");
  const std::uint64_t seed = effective_seed(o.seed);
  const auto kind = simlab::parse_scenario(o.scenario);
  simlab::SimScenario scenario;
  switch (kind) {
    case simlab::ScenarioKind::gaussian_mean: scenario = simlab::SimScenario::gaussian(o.n, 0.4, seed); break;
    case simlab::ScenarioKind::randomized_ate: scenario = simlab::SimScenario::randomized(o.n, seed); break;
    case simlab::ScenarioKind::observational_ate: scenario = simlab::SimScenario::observational(o.n, seed); break;
  }

  std::vector<simlab::EstimatorSpec> estimators;
  if (kind != simlab::ScenarioKind::gaussian_mean) {
    ate::EngineConfig base;
    base.boundary = {o.alpha, ate::default_rho(o.alpha, o.start)};
    base.mode = kind == simlab::ScenarioKind::observational_ate ? ate::DesignMode::observational
                                                                 : ate::DesignMode::randomized;
    base.crossfit = o.crossfit;
    base.scoring = ate::Scoring::batch;
    base.t_min = o.start;
    auto with = [&](nuisance::LearnerSpec outcome) {
      ate::EngineConfig c = base;
      c.nuisance.outcome = std::move(outcome);
      return c;
    };
    estimators.push_back(simlab::EstimatorSpec::doubly_robust(with(nuisance::LearnerSpec::default_outcome_ensemble()), "ensemble"));
    estimators.push_back(simlab::EstimatorSpec::doubly_robust(with(nuisance::LearnerSpec::linear()), "linear"));
    estimators.push_back(simlab::EstimatorSpec::unadjusted(base));
  }

  const auto reports = simlab::run_miscoverage(scenario, estimators, o.reps, o.start, o.alpha, o.threads);
  fs::create_directories(o.out);
  for (const auto& r : reports) {
    std::ofstream csv(fs::path(o.out) / (r.label + ".csv"));
    if (!csv) throw DomainError("cannot write into " + o.out);
    simlab::write_report_csv(csv, r);
  }
  std::ofstream summary(fs::path(o.out) / "summary.json");
  simlab::write_summary_json(summary, reports);
  simlab::write_summary_json(std::cout, reports);
  return 0;
}

int run_tune_rho(double alpha, std::uint64_t t_star, const std::string& method) {
  using boundaries::RhoMethod;
  const double approx = boundaries::tune_rho(alpha, t_star, RhoMethod::approx);
  std::optional<double> exact;
  try {
    exact = boundaries::tune_rho(alpha, t_star, RhoMethod::exact);
  } catch (const DomainError& e) {
    if (boundaries::parse_rho_method(method) == RhoMethod::exact) throw;
    std::cerr << "seqdr tune-rho: " << e.what() << '\n';
  }
  std::cout << "method,rho\n";
  const RhoMethod chosen = boundaries::parse_rho_method(method);
  if (exact) std::cout << "exact," << format_number(*exact) << (chosen == RhoMethod::exact ? ",selected" : "") << '\n';
  std::cout << "approx," << format_number(approx) << (chosen == RhoMethod::approx ? ",selected" : "") << '\n';
  if (exact) std::cout << "relative_gap," << format_number(std::abs(approx - *exact) / *exact) << '\n';
  return 0;
}

int run_width_table(double alpha, const std::vector<std::uint64_t>& t_opts) {
  std::cout << "t_opt,t,rho,cs_radius,ci_radius,ratio\n";
  for (const auto& r : simlab::width_table(alpha, t_opts))
    std::cout << r.t_opt << ',' << r.t << ',' << format_number(r.rho) << ',' << format_number(r.cs_radius) << ','
              << format_number(r.ci_radius) << ',' << format_number(r.ratio) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anytime-valid confidence sequences for means and average treatment effects"};
  app.require_subcommand(1);

  MonitorOptions mon;
  auto* monitor = app.add_subcommand("monitor", "Stream observations and emit a confidence sequence row per record");
  monitor->add_option("--alpha", mon.alpha, "Miscoverage level")->capture_default_str();
  auto* rho_opt = monitor->add_option("--rho", mon.rho, "Mixture scale");
  monitor->add_option("--opt-t", mon.opt_t, "Time at which to optimize the width")->excludes(rho_opt);
  monitor->add_option("--mode", mon.mode, "randomized or observational")->capture_default_str();
  monitor->add_flag("--crossfit", mon.crossfit, "Cross-fit the two halves");
  monitor->add_option("--scoring", mon.scoring, "online or batch")->capture_default_str();
  monitor->add_option("--refit-schedule", mon.refit, "doubling or every")->capture_default_str();
  monitor->add_option("--split", mon.split, "bernoulli or alternating")->capture_default_str();
  monitor->add_option("--learner", mon.learner, "mean, linear, knn, additive or ensemble")->capture_default_str();
  monitor->add_option("--config", mon.config_path, "key=value file: learner, knn.k, clip.delta");
  monitor->add_option("--input", mon.input, "CSV or JSON-lines input, - for stdin")->capture_default_str();
  monitor->add_option("--schema", mon.schema, "Covariate dimension, d=K")->capture_default_str();
  monitor->add_option("--out", mon.out, "Output CSV, - for stdout")->capture_default_str();
  monitor->add_option("--audit-split", mon.audit_path, "Write the split assignment log here");
  monitor->add_option("--seed", mon.seed, "Seed for the split coin")->capture_default_str();
  monitor->add_option("--t-min", mon.t_min, "Warm-up: first time an interval may be reported")->capture_default_str();
  monitor->add_flag("--skip-bad", mon.skip_bad, "Exit zero even when rows were rejected");

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo miscoverage for a built-in scenario");
  simulate->add_option("--scenario", sim.scenario, "gaussian, randomized or observational")->capture_default_str();
  simulate->add_option("--n", sim.n, "Horizon")->capture_default_str();
  simulate->add_option("--reps", sim.reps, "Replications")->capture_default_str();
  simulate->add_option("--alpha", sim.alpha, "Miscoverage level")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  simulate->add_option("--start", sim.start, "First time counted")->capture_default_str();
  simulate->add_flag("--crossfit", sim.crossfit, "Cross-fit the doubly robust estimators");
  simulate->add_option("--threads", sim.threads, "Worker threads, 0 for all cores")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory")->capture_default_str();

  double tr_alpha = 0.05;
  std::uint64_t tr_t = 100;
  std::string tr_method = "exact";
  auto* tune = app.add_subcommand("tune-rho", "Mixture scale minimizing the width at a chosen time");
  tune->add_option("--alpha", tr_alpha, "Miscoverage level")->capture_default_str();
  tune->add_option("--t-star", tr_t, "Target time")->required();
  tune->add_option("--method", tr_method, "exact or approx")->capture_default_str();

  double wt_alpha = 0.05;
  std::vector<std::uint64_t> wt_opts{100};
  auto* widths = app.add_subcommand("width-table", "Confidence sequence to fixed-time interval width ratios");
  widths->add_option("--alpha", wt_alpha, "Miscoverage level")->capture_default_str();
  widths->add_option("--t-opts", wt_opts, "Optimization times")->delimiter(',')->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*monitor) return run_monitor(mon);
    if (*simulate) return run_simulate(sim);
    if (*tune) return run_tune_rho(tr_alpha, tr_t, tr_method);
    if (*widths) return run_width_table(wt_alpha, wt_opts);
  } catch (const std::exception& e) {
    std::cerr << "seqdr: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
