#pragma once

// Doubly robust confidence sequences for the average treatment effect.
//
// Arrivals are split into a training and an evaluation stream. Nuisances fit
// on the training stream score the evaluation stream through the efficient
// influence function; the running mean of those scores is the estimate and
// their divide-by-T variance scales the boundary. With cross-fitting the
// roles are also swapped and the two estimates averaged.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqdr/boundaries.hpp"
#include "seqdr/error.hpp"
#include "seqdr/numerics/moments.hpp"
#include "seqdr/nuisance.hpp"
#include "seqdr/observation.hpp"
#include "seqdr/splitting.hpp"

namespace seqdr::ate {

using boundaries::BoundarySpec;
using boundaries::CsPoint;
using numerics::RunningMoments;

enum class DesignMode { randomized, observational };
enum class Scoring { online, batch };
enum class RefitSchedule { doubling, every };

inline DesignMode parse_design_mode(std::string_view name) {
  if (name == "randomized") return DesignMode::randomized;
  if (name == "observational") return DesignMode::observational;
  throw DomainError("unknown design mode: " + std::string(name));
}

inline Scoring parse_scoring(std::string_view name) {
  if (name == "online") return Scoring::online;
  if (name == "batch") return Scoring::batch;
  throw DomainError("unknown scoring mode: " + std::string(name));
}

inline RefitSchedule parse_refit_schedule(std::string_view name) {
  if (name == "doubling") return RefitSchedule::doubling;
  if (name == "every") return RefitSchedule::every;
  throw DomainError("unknown refit schedule: " + std::string(name));
}

// Uncentered efficient influence function
//   {mu1(x) - mu0(x)} + (a/pi(x) - (1-a)/(1-pi(x))) (y - mu_a(x)),
// with the record's design propensity when the fit carries none.
inline double eval_influence(const Observation& z, const nuisance::NuisanceFit& fit) {
  double pi;
  if (fit.pi) {
    pi = fit.pi->predict(z.x);
  } else if (z.known_pi) {
    pi = *z.known_pi;
  } else {
    throw DataError("eval_influence: no propensity available for record");
  }
  const double m1 = fit.mu1->predict(z.x);
  const double m0 = fit.mu0->predict(z.x);
  const double residual = z.y - (z.a == 1 ? m1 : m0);
  const double weight = z.a == 1 ? 1.0 / pi : -1.0 / (1.0 - pi);
  return (m1 - m0) + weight * residual;
}

// Default minimum time before any interval is reported.
inline constexpr std::uint64_t kDefaultTMin = 25;

// rho optimized for 5 * t_min.
inline double default_rho(double alpha, std::uint64_t t_min = kDefaultTMin) {
  return boundaries::tune_rho(alpha, 5 * t_min, boundaries::RhoMethod::exact);
}

// Inverse-propensity weighted difference without sample splitting. Randomized
// mode weights by each record's design propensity; observational mode uses the
// running treated fraction for every record.
class UnadjustedEstimator {
 public:
  UnadjustedEstimator(DesignMode mode, BoundarySpec spec, std::uint64_t t_min = kDefaultTMin)
      : mode_(mode), spec_(spec), t_min_(t_min) {
    spec_.validate();
  }

  void push(const Observation& z) {
    z.validate();
    ++t_;
    if (mode_ == DesignMode::randomized) {
      if (!z.known_pi) throw DataError("unadjusted estimator: randomized mode needs a known propensity");
      const double pi = *z.known_pi;
      terms_.push((z.a == 1 ? 1.0 / pi : -1.0 / (1.0 - pi)) * z.y);
    } else {
      (z.a == 1 ? treated_ : control_).push(z.y);
    }
  }

  std::uint64_t t() const { return t_; }

  // nullopt before the first record, or while an arm is empty in observational mode.
  std::optional<double> estimate() const {
    if (t_ == 0) return std::nullopt;
    if (mode_ == DesignMode::randomized) return terms_.mean();
    if (treated_.count() == 0 || control_.count() == 0) return std::nullopt;
    // (1/t) sum (a/p - (1-a)/(1-p)) y with p = n1/t reduces to the difference of arm means.
    return treated_.mean() - control_.mean();
  }

  // Divide-by-t variance of the summands.
  std::optional<double> variance() const {
    const auto est = estimate();
    if (!est) return std::nullopt;
    if (mode_ == DesignMode::randomized) return terms_.variance();
    const double td = static_cast<double>(t_);
    const double p = static_cast<double>(treated_.count()) / td;
    const double m1 = treated_.mean();
    const double m0 = control_.mean();
    const double second = (treated_.variance() + m1 * m1) / p + (control_.variance() + m0 * m0) / (1.0 - p);
    return std::max(0.0, second - (*est) * (*est));
  }

  std::optional<CsPoint> point() const {
    if (t_ < std::max<std::uint64_t>(t_min_, 2)) return std::nullopt;
    const auto est = estimate();
    if (!est) return std::nullopt;
    const double v = *variance();
    return CsPoint::make(t_, *est, boundaries::radius(t_, v, spec_), v);
  }

 private:
  DesignMode mode_;
  BoundarySpec spec_;
  std::uint64_t t_min_;
  std::uint64_t t_ = 0;
  RunningMoments terms_;
  RunningMoments treated_;
  RunningMoments control_;
};

// Running mean +/- boundary for a caller-supplied stream of influence values.
class GeneralCs {
 public:
  explicit GeneralCs(BoundarySpec spec) : spec_(spec) { spec_.validate(); }

  CsPoint push(double phi) {
    moments_.push(phi);
    return point();
  }

  CsPoint point() const {
    if (moments_.count() == 0) throw DomainError("GeneralCs: no values yet");
    return around(moments_.mean());
  }

  // Interval around an externally computed asymptotically linear estimate.
  CsPoint around(double estimate) const {
    if (moments_.count() == 0) throw DomainError("GeneralCs: no values yet");
    const double v = moments_.variance();
    return CsPoint::make(moments_.count(), estimate, boundaries::radius(moments_.count(), v, spec_), v);
  }

  const RunningMoments& moments() const { return moments_; }

 private:
  BoundarySpec spec_;
  RunningMoments moments_;
};

inline std::vector<CsPoint> general_cs(std::span<const double> phi_values, const BoundarySpec& spec) {
  GeneralCs cs(spec);
  std::vector<CsPoint> out;
  out.reserve(phi_values.size());
  for (double phi : phi_values) out.push_back(cs.push(phi));
  return out;
}

struct EngineConfig {
  BoundarySpec boundary{0.1, default_rho(0.1)};
  DesignMode mode = DesignMode::randomized;
  bool crossfit = false;
  Scoring scoring = Scoring::batch;
  RefitSchedule refit = RefitSchedule::doubling;
  nuisance::NuisanceConfig nuisance;
  splitting::SplitMode split = splitting::SplitMode::bernoulli_half;
  std::uint64_t seed = 0;
  std::uint64_t t_min = kDefaultTMin;
};

// One direction of the split: nuisances fit on `fit_records`, influence
// values computed on `score_records`.
class SplitView {
 public:
  explicit SplitView(const EngineConfig* config) : config_(config) {}

  void add_fit_record(const Observation& z) {
    fit_records_.push_back(z);
    const auto n = fit_records_.size();
    const bool due = config_->refit == RefitSchedule::every || !fit_ || n >= next_refit_;
    if (!due) return;
    auto fit = nuisance::fit_nuisance(fit_records_, config_->nuisance);
    if (fit) {
      fit_ = std::move(fit);
      ++fit_version_;
    }
    while (next_refit_ <= n) next_refit_ *= 2;
  }

  void add_score_record(const Observation& z) { score_records_.push_back(z); }

  // Bring the scores up to date. Batch scoring recomputes every stored record
  // whenever the fit changed; online scoring evaluates each record once, with
  // the first fit available at or after its arrival.
  void refresh() {
    if (!fit_) return;
    if (config_->scoring == Scoring::batch && scored_version_ != fit_version_) {
      scores_.clear();
      moments_ = RunningMoments{};
      clip_hits_ = 0;
    }
    scored_version_ = fit_version_;
    for (std::size_t i = scores_.size(); i < score_records_.size(); ++i) {
      const Observation& z = score_records_[i];
      if (fit_->pi) {
        const double p = fit_->pi->predict(z.x);
        if (p <= fit_->clip_delta || p >= 1.0 - fit_->clip_delta) ++clip_hits_;
      }
      const double f = eval_influence(z, *fit_);
      scores_.push_back(f);
      moments_.push(f);
    }
  }

  bool ready() const { return fit_.has_value() && scores_.size() == score_records_.size() && !scores_.empty(); }

  const std::optional<nuisance::NuisanceFit>& fit() const { return fit_; }
  const RunningMoments& moments() const { return moments_; }
  const std::vector<double>& scores() const { return scores_; }
  const std::vector<Observation>& fit_records() const { return fit_records_; }
  const std::vector<Observation>& score_records() const { return score_records_; }
  std::uint64_t fit_version() const { return fit_version_; }
  std::uint64_t clip_hits() const { return clip_hits_; }

 private:
  const EngineConfig* config_;
  std::vector<Observation> fit_records_;
  std::vector<Observation> score_records_;
  std::optional<nuisance::NuisanceFit> fit_;
  std::uint64_t fit_version_ = 0;
  std::uint64_t next_refit_ = 1;
  std::uint64_t scored_version_ = 0;
  std::vector<double> scores_;
  RunningMoments moments_;
  std::uint64_t clip_hits_ = 0;
};

enum class Status { ok, not_ready };

inline std::string_view to_string(Status s) { return s == Status::ok ? "ok" : "not_ready"; }

struct Emission {
  std::uint64_t t = 0;
  std::uint64_t t_eval = 0;   // T
  std::uint64_t t_train = 0;  // T'
  splitting::Split split = splitting::Split::train;
  Status status = Status::not_ready;
  std::optional<CsPoint> point;  // cross-fit point when cross-fitting, else single split
};

class AteEngine {
 public:
  explicit AteEngine(EngineConfig config)
      : config_(std::make_unique<EngineConfig>(std::move(config))),
        ledger_(config_->split, config_->seed),
        primary_(config_.get()),
        swapped_(config_.get()) {
    config_->boundary.validate();
    config_->nuisance.estimate_propensity = config_->mode == DesignMode::observational;
  }

  Emission update(const Observation& z) {
    z.validate();
    if (config_->mode == DesignMode::randomized && !z.known_pi)
      throw DataError("randomized mode requires a known propensity on every record");
    if (config_->mode == DesignMode::observational && z.known_pi)
      throw DataError("observational mode records must not carry a propensity");
    // The coin does not depend on the record's content.
    const splitting::Split split = ledger_.assign();
    if (split == splitting::Split::train) {
      primary_.add_fit_record(z);
      if (config_->crossfit) swapped_.add_score_record(z);
    } else {
      primary_.add_score_record(z);
      if (config_->crossfit) swapped_.add_fit_record(z);
    }
    primary_.refresh();
    if (config_->crossfit) swapped_.refresh();

    Emission e;
    e.t = ledger_.t();
    e.t_eval = ledger_.t_eval();
    e.t_train = ledger_.t_train();
    e.split = split;
    e.point = config_->crossfit ? crossfit_point() : single_split_point();
    e.status = e.point ? Status::ok : Status::not_ready;
    return e;
  }

  // psi_hat_t from the training -> evaluation direction, radius at T.
  std::optional<CsPoint> single_split_point() const { return view_point(primary_, ledger_.t_eval()); }

  // Estimate from the swapped direction, radius at T'.
  std::optional<CsPoint> swapped_point() const {
    if (!config_->crossfit) return std::nullopt;
    return view_point(swapped_, ledger_.t_train());
  }

  // (psi_hat + psi_hat') / 2 with radius at t from the pooled variance of all
  // t influence values.
  std::optional<CsPoint> crossfit_point() const {
    if (!config_->crossfit || !primary_.ready() || !swapped_.ready()) return std::nullopt;
    const std::uint64_t t = ledger_.t();
    if (t < std::max<std::uint64_t>(config_->t_min, 2)) return std::nullopt;
    const double estimate = 0.5 * (primary_.moments().mean() + swapped_.moments().mean());
    const double v = RunningMoments::merged(primary_.moments(), swapped_.moments()).variance();
    return CsPoint::make(t, estimate, boundaries::radius(t, v, config_->boundary), v);
  }

  const EngineConfig& config() const { return *config_; }
  const splitting::SplitLedger& ledger() const { return ledger_; }
  const SplitView& primary() const { return primary_; }
  const SplitView& swapped() const { return swapped_; }

 private:
  std::optional<CsPoint> view_point(const SplitView& view, std::uint64_t scored) const {
    if (!view.ready() || scored < std::max<std::uint64_t>(config_->t_min, 2)) return std::nullopt;
    const double v = view.moments().variance();
    return CsPoint::make(ledger_.t(), view.moments().mean(), boundaries::radius(scored, v, config_->boundary), v);
  }

  std::unique_ptr<EngineConfig> config_;
  splitting::SplitLedger ledger_;
  SplitView primary_;
  SplitView swapped_;
};

}  // namespace seqdr::ate
