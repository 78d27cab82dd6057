#pragma once

// Nuisance learners for the outcome regressions mu^1, mu^0 and the
// propensity score pi. Fitted predictors are immutable and shared by pointer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seqdr/error.hpp"
#include "seqdr/numerics/linalg.hpp"
#include "seqdr/numerics/special.hpp"
#include "seqdr/observation.hpp"

namespace seqdr::nuisance {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Training data for one learner: covariate rows and a response.
struct Dataset {
  RowMatrix x;
  Eigen::VectorXd y;

  Eigen::Index size() const { return y.size(); }
  Eigen::Index dim() const { return x.cols(); }

  // Rows [begin, end).
  Dataset slice(Eigen::Index begin, Eigen::Index end) const {
    return Dataset{x.middleRows(begin, end - begin), y.segment(begin, end - begin)};
  }
};

// Outcomes of the records in arm `arm`, in arrival order.
inline Dataset outcome_dataset(std::span<const Observation> records, int arm) {
  const auto n = std::count_if(records.begin(), records.end(), [arm](const Observation& o) { return o.a == arm; });
  const Eigen::Index d = records.empty() ? 0 : static_cast<Eigen::Index>(records.front().x.size());
  Dataset data{RowMatrix(n, d), Eigen::VectorXd(n)};
  Eigen::Index row = 0;
  for (const auto& o : records) {
    if (o.a != arm) continue;
    if (static_cast<Eigen::Index>(o.x.size()) != d) throw DataError("inconsistent covariate dimension");
    for (Eigen::Index j = 0; j < d; ++j) data.x(row, j) = o.x[static_cast<std::size_t>(j)];
    data.y(row++) = o.y;
  }
  return data;
}

// Treatment labels of all records.
inline Dataset treatment_dataset(std::span<const Observation> records) {
  const auto n = static_cast<Eigen::Index>(records.size());
  const Eigen::Index d = records.empty() ? 0 : static_cast<Eigen::Index>(records.front().x.size());
  Dataset data{RowMatrix(n, d), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = records[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(o.x.size()) != d) throw DataError("inconsistent covariate dimension");
    for (Eigen::Index j = 0; j < d; ++j) data.x(i, j) = o.x[static_cast<std::size_t>(j)];
    data.y(i) = o.a;
  }
  return data;
}

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual double predict(std::span<const double> x) const = 0;
  virtual std::string name() const = 0;
};

using PredictorPtr = std::shared_ptr<const Predictor>;

class ConstantPredictor final : public Predictor {
 public:
  explicit ConstantPredictor(double value) : value_(value) {}
  double predict(std::span<const double>) const override { return value_; }
  std::string name() const override { return "mean_only"; }

 private:
  double value_;
};

class LinearPredictor final : public Predictor {
 public:
  LinearPredictor(double intercept, Eigen::VectorXd slope) : intercept_(intercept), slope_(std::move(slope)) {}

  double predict(std::span<const double> x) const override {
    double v = intercept_;
    for (Eigen::Index j = 0; j < slope_.size(); ++j) v += slope_(j) * x[static_cast<std::size_t>(j)];
    return v;
  }
  std::string name() const override { return "linear"; }

  double intercept() const { return intercept_; }
  const Eigen::VectorXd& slope() const { return slope_; }

 private:
  double intercept_;
  Eigen::VectorXd slope_;
};

// expit of a linear index.
class LogisticPredictor final : public Predictor {
 public:
  explicit LogisticPredictor(LinearPredictor index) : index_(std::move(index)) {}
  double predict(std::span<const double> x) const override { return numerics::expit(index_.predict(x)); }
  std::string name() const override { return "logistic"; }

 private:
  LinearPredictor index_;
};

// Mean response of the k nearest training rows (Euclidean). Ties in distance
// are broken by the earlier training row.
class KnnPredictor final : public Predictor {
 public:
  KnnPredictor(Dataset data, int k) : data_(std::move(data)), k_(k) {
    if (k_ < 1) throw DomainError("knn: k must be >= 1");
    if (data_.size() == 0) throw DomainError("knn: empty training data");
  }

  double predict(std::span<const double> x) const override {
    const Eigen::Index n = data_.size();
    const Eigen::Index d = data_.dim();
    const auto k = static_cast<std::size_t>(std::min<Eigen::Index>(k_, n));
    std::priority_queue<std::pair<double, Eigen::Index>> nearest;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* row = data_.x.data() + i * d;
      double dist = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = row[j] - x[static_cast<std::size_t>(j)];
        dist += diff * diff;
      }
      if (nearest.size() < k) {
        nearest.emplace(dist, i);
      } else if (std::pair(dist, i) < nearest.top()) {
        nearest.pop();
        nearest.emplace(dist, i);
      }
    }
    double sum = 0.0;
    const auto m = nearest.size();
    while (!nearest.empty()) {
      sum += data_.y(nearest.top().second);
      nearest.pop();
    }
    return sum / static_cast<double>(m);
  }
  std::string name() const override { return "knn"; }

 private:
  Dataset data_;
  int k_;
};

// Sum of per-coordinate piecewise-linear functions,
//   b0 + sum_j { c_j x_j + sum_k c_jk (x_j - knot_jk)_+ },
// optionally passed through expit.
class AdditivePredictor final : public Predictor {
 public:
  AdditivePredictor(std::vector<std::vector<double>> knots, LinearPredictor index, bool logistic)
      : knots_(std::move(knots)), index_(std::move(index)), logistic_(logistic) {}

  static std::size_t width(const std::vector<std::vector<double>>& knots) {
    std::size_t w = 0;
    for (const auto& k : knots) w += 1 + k.size();
    return w;
  }

  static void expand(const std::vector<std::vector<double>>& knots, std::span<const double> x, double* out) {
    for (std::size_t j = 0; j < knots.size(); ++j) {
      *out++ = x[j];
      for (double kn : knots[j]) *out++ = std::max(0.0, x[j] - kn);
    }
  }

  double predict(std::span<const double> x) const override {
    std::vector<double> basis(width(knots_));
    expand(knots_, x, basis.data());
    const double eta = index_.predict(basis);
    return logistic_ ? numerics::expit(eta) : eta;
  }
  std::string name() const override { return "additive"; }

 private:
  std::vector<std::vector<double>> knots_;
  LinearPredictor index_;
  bool logistic_;
};

class WeightedPredictor final : public Predictor {
 public:
  WeightedPredictor(std::vector<PredictorPtr> members, std::vector<double> weights)
      : members_(std::move(members)), weights_(std::move(weights)) {}

  double predict(std::span<const double> x) const override {
    double v = 0.0;
    for (std::size_t k = 0; k < members_.size(); ++k)
      if (weights_[k] != 0.0) v += weights_[k] * members_[k]->predict(x);
    return v;
  }
  std::string name() const override { return "ensemble"; }

  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<PredictorPtr> members_;
  std::vector<double> weights_;
};

// Probability predictor clamped to [delta, 1 - delta].
class ClippedPredictor final : public Predictor {
 public:
  ClippedPredictor(PredictorPtr inner, double delta) : inner_(std::move(inner)), delta_(delta) {}
  double predict(std::span<const double> x) const override {
    return std::clamp(inner_->predict(x), delta_, 1.0 - delta_);
  }
  std::string name() const override { return inner_->name(); }

 private:
  PredictorPtr inner_;
  double delta_;
};

enum class LearnerKind { mean_only, linear, logistic, knn, additive, ensemble };

inline std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::mean_only: return "mean_only";
    case LearnerKind::linear: return "linear";
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::knn: return "knn";
    case LearnerKind::additive: return "additive";
    case LearnerKind::ensemble: return "ensemble";
  }
  return "unknown";
}

inline LearnerKind parse_learner_kind(std::string_view name) {
  if (name == "mean_only" || name == "mean") return LearnerKind::mean_only;
  if (name == "linear") return LearnerKind::linear;
  if (name == "logistic") return LearnerKind::logistic;
  if (name == "knn") return LearnerKind::knn;
  if (name == "additive") return LearnerKind::additive;
  if (name == "ensemble") return LearnerKind::ensemble;
  throw DomainError("unknown learner: " + std::string(name));
}

struct LearnerSpec {
  LearnerKind kind = LearnerKind::mean_only;
  int knn_k = 10;
  double ridge = 1e-8;
  int irls_iters = 25;
  double irls_tol = 1e-8;
  int spline_knots = 8;
  double spline_penalty = 1e-4;  // per-row ridge on the additive basis
  std::vector<LearnerSpec> candidates;  // ensemble only

  static LearnerSpec of(LearnerKind kind) {
    LearnerSpec s;
    s.kind = kind;
    return s;
  }
  static LearnerSpec mean_only() { return of(LearnerKind::mean_only); }
  static LearnerSpec linear() { return of(LearnerKind::linear); }
  static LearnerSpec logistic() { return of(LearnerKind::logistic); }
  static LearnerSpec knn(int k = 10) {
    LearnerSpec s = of(LearnerKind::knn);
    s.knn_k = k;
    return s;
  }
  static LearnerSpec additive(int knots = 8) {
    LearnerSpec s = of(LearnerKind::additive);
    s.spline_knots = knots;
    return s;
  }
  static LearnerSpec ensemble(std::vector<LearnerSpec> candidates) {
    LearnerSpec s = of(LearnerKind::ensemble);
    s.candidates = std::move(candidates);
    return s;
  }

  // {mean_only, linear, knn(k), additive} for outcomes.
  static LearnerSpec default_outcome_ensemble(int k = 10) {
    return ensemble({mean_only(), linear(), knn(k), additive()});
  }
  // {mean_only, logistic, knn(k), additive} for the propensity score.
  static LearnerSpec default_propensity_ensemble(int k = 10) {
    return ensemble({mean_only(), logistic(), knn(k), additive()});
  }
};

// Each arm needs this many training rows before its own learner is used;
// below it the arm mean stands in.
inline constexpr std::size_t kColdStartMin = 5;
// An ensemble needs at least 2 * kHoldoutMin rows for its 80/20 tuning split.
inline constexpr Eigen::Index kHoldoutMin = 5;
inline constexpr int kSimplexSteps = 500;

namespace detail {

inline Eigen::MatrixXd with_intercept(const RowMatrix& x) {
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  return design;
}

// Ridge-stabilized least squares; the intercept is not penalized.
inline LinearPredictor fit_least_squares(const Dataset& data, double ridge) {
  const Eigen::MatrixXd design = with_intercept(data.x);
  Eigen::MatrixXd gram = design.transpose() * design;
  gram.diagonal().tail(data.dim()).array() += ridge * std::max<double>(1.0, static_cast<double>(data.size()));
  const Eigen::VectorXd beta = gram.ldlt().solve(design.transpose() * data.y);
  return LinearPredictor(beta(0), beta.tail(data.dim()));
}

// Logistic regression by iteratively reweighted least squares.
inline LinearPredictor fit_irls(const Dataset& data, const LearnerSpec& spec) {
  const Eigen::MatrixXd design = with_intercept(data.x);
  const Eigen::Index p = design.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int iter = 0; iter < spec.irls_iters; ++iter) {
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd prob(eta.size());
    Eigen::VectorXd weight(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      prob(i) = numerics::expit(eta(i));
      weight(i) = std::max(prob(i) * (1.0 - prob(i)), 1e-10);
    }
    Eigen::MatrixXd info = design.transpose() * weight.asDiagonal() * design;
    info.diagonal().array() += spec.ridge;
    const Eigen::VectorXd step = info.ldlt().solve(design.transpose() * (data.y - prob));
    if (!step.allFinite()) break;
    beta += step;
    if (step.cwiseAbs().maxCoeff() < spec.irls_tol) break;
  }
  return LinearPredictor(beta(0), beta.tail(p - 1));
}

// Knots at evenly spaced empirical quantiles of each column, at most one per
// ten rows, duplicates removed.
inline std::vector<std::vector<double>> quantile_knots(const RowMatrix& x, int max_knots) {
  const Eigen::Index n = x.rows();
  const auto k = static_cast<Eigen::Index>(std::clamp<Eigen::Index>(n / 10 - 1, 0, std::max(0, max_knots)));
  std::vector<std::vector<double>> knots(static_cast<std::size_t>(x.cols()));
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = x(i, j);
    std::sort(col.begin(), col.end());
    auto& kj = knots[static_cast<std::size_t>(j)];
    for (Eigen::Index m = 1; m <= k; ++m) kj.push_back(col[static_cast<std::size_t>((m * n) / (k + 1))]);
    kj.erase(std::unique(kj.begin(), kj.end()), kj.end());
  }
  return knots;
}

inline AdditivePredictor fit_additive(const Dataset& data, const LearnerSpec& spec, bool probability) {
  auto knots = quantile_knots(data.x, spec.spline_knots);
  const auto w = static_cast<Eigen::Index>(AdditivePredictor::width(knots));
  Dataset basis{RowMatrix(data.size(), w), data.y};
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double* row = data.x.data() + i * data.dim();
    AdditivePredictor::expand(knots, {row, static_cast<std::size_t>(data.dim())}, basis.x.data() + i * w);
  }
  if (!probability) return {std::move(knots), fit_least_squares(basis, spec.spline_penalty), false};
  LearnerSpec irls = spec;
  irls.ridge = spec.spline_penalty * static_cast<double>(std::max<Eigen::Index>(1, data.size()));
  return {std::move(knots), fit_irls(basis, irls), true};
}

// Euclidean projection onto the probability simplex (sort-based).
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

}  // namespace detail

enum class EnsembleLoss { squared, log };

inline double mean_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& y, EnsembleLoss loss) {
  if (pred.size() == 0) return 0.0;
  if (loss == EnsembleLoss::squared) return (pred - y).squaredNorm() / static_cast<double>(y.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double p = std::clamp(pred(i), 1e-15, 1.0 - 1e-15);
    total -= y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p);
  }
  return total / static_cast<double>(y.size());
}

// Minimize the tuning-fold loss of Q w over the simplex by projected gradient
// descent with step 1/L, starting from the best single candidate. Each step
// does not increase the loss, so the result is never worse than that vertex.
inline Eigen::VectorXd simplex_weights(const Eigen::MatrixXd& q, const Eigen::VectorXd& y, EnsembleLoss loss,
                                       int steps = kSimplexSteps) {
  const Eigen::Index k = q.cols();
  const auto n = static_cast<double>(q.rows());
  Eigen::Index best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < k; ++j) {
    const double l = mean_loss(q.col(j), y, loss);
    if (l < best_loss) {
      best_loss = l;
      best = j;
    }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  w(best) = 1.0;
  if (k == 1 || q.rows() == 0) return w;

  double lipschitz;
  if (loss == EnsembleLoss::squared) {
    lipschitz = 2.0 / n * numerics::opnorm(q.transpose() * q);
  } else {
    // Mixtures of the candidate probabilities stay within [min Q, max Q].
    const double lo = std::max(q.minCoeff(), 1e-15);
    const double hi = std::min(q.maxCoeff(), 1.0 - 1e-15);
    const double curvature = std::max(1.0 / (lo * lo), 1.0 / ((1.0 - hi) * (1.0 - hi)));
    lipschitz = q.rowwise().squaredNorm().mean() * curvature;
  }
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) return w;

  for (int s = 0; s < steps; ++s) {
    const Eigen::VectorXd pred = q * w;
    Eigen::VectorXd grad;
    if (loss == EnsembleLoss::squared) {
      grad = 2.0 / n * q.transpose() * (pred - y);
    } else {
      Eigen::VectorXd score(pred.size());
      for (Eigen::Index i = 0; i < pred.size(); ++i)
        score(i) = -(y(i) / pred(i) - (1.0 - y(i)) / (1.0 - pred(i)));
      grad = q.transpose() * score / n;
    }
    w = detail::project_to_simplex(w - grad / lipschitz);
  }
  return w;
}

struct EnsembleFit {
  PredictorPtr predictor;
  std::vector<double> weights;
  std::vector<double> candidate_tuning_loss;  // each candidate on the newest 20%
  double tuning_loss = 0.0;                   // weighted combination on the newest 20%
};

inline std::optional<PredictorPtr> fit_learner(const Dataset& data, const LearnerSpec& spec, bool probability,
                                               double clip_delta);

// Stacked ensemble: candidates are fit on the oldest 80% of rows, simplex
// weights are tuned on the newest 20%, and the candidates are then refit on
// all rows and combined with those weights.
inline EnsembleFit fit_ensemble(const Dataset& data, const std::vector<LearnerSpec>& candidates, bool probability,
                                double clip_delta = 0.01) {
  if (candidates.empty()) throw DomainError("fit_ensemble: need at least one candidate");
  if (data.size() < 2 * kHoldoutMin) throw DomainError("fit_ensemble: too few observations for a tuning fold");
  const Eigen::Index n = data.size();
  const Eigen::Index n_fit = (n * 4) / 5;
  const Dataset older = data.slice(0, n_fit);
  const Dataset newest = data.slice(n_fit, n);
  const EnsembleLoss loss = probability ? EnsembleLoss::log : EnsembleLoss::squared;

  Eigen::MatrixXd q(newest.size(), static_cast<Eigen::Index>(candidates.size()));
  EnsembleFit out;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto fit = fit_learner(older, candidates[k], probability, clip_delta);
    // A single-class older fold leaves no fit; its (clipped) base rate stands in.
    const double fallback = probability ? std::clamp(older.y.mean(), clip_delta, 1.0 - clip_delta) : older.y.mean();
    for (Eigen::Index i = 0; i < newest.size(); ++i) {
      const double* row = newest.x.data() + i * newest.dim();
      q(i, static_cast<Eigen::Index>(k)) =
          fit ? (*fit)->predict({row, static_cast<std::size_t>(newest.dim())}) : fallback;
    }
    out.candidate_tuning_loss.push_back(mean_loss(q.col(static_cast<Eigen::Index>(k)), newest.y, loss));
  }
  const Eigen::VectorXd w = simplex_weights(q, newest.y, loss);
  out.weights.assign(w.data(), w.data() + w.size());
  out.tuning_loss = mean_loss(q * w, newest.y, loss);

  std::vector<PredictorPtr> members;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    auto fit = out.weights[k] > 0.0 ? fit_learner(data, candidates[k], probability, clip_delta) : std::nullopt;
    members.push_back(fit ? *fit : std::make_shared<ConstantPredictor>(data.y.mean()));
  }
  out.predictor = std::make_shared<WeightedPredictor>(std::move(members), out.weights);
  if (probability) out.predictor = std::make_shared<ClippedPredictor>(out.predictor, clip_delta);
  return out;
}

// Fit one learner. For probability targets (0/1 response) the output is
// clipped to [clip_delta, 1 - clip_delta]. nullopt when the data cannot
// support a fit (empty, or a single class for probabilities).
inline std::optional<PredictorPtr> fit_learner(const Dataset& data, const LearnerSpec& spec, bool probability,
                                               double clip_delta) {
  if (data.size() == 0) return std::nullopt;
  if (probability) {
    const double treated = data.y.sum();
    if (treated == 0.0 || treated == static_cast<double>(data.size())) return std::nullopt;
  }
  PredictorPtr raw;
  switch (spec.kind) {
    case LearnerKind::mean_only:
      raw = std::make_shared<ConstantPredictor>(data.y.mean());
      break;
    case LearnerKind::linear:
      if (probability) throw DomainError("linear learner cannot model a probability; use logistic");
      raw = std::make_shared<LinearPredictor>(detail::fit_least_squares(data, spec.ridge));
      break;
    case LearnerKind::logistic:
      if (!probability) throw DomainError("logistic learner is for probabilities only");
      raw = std::make_shared<LogisticPredictor>(detail::fit_irls(data, spec));
      break;
    case LearnerKind::knn:
      raw = std::make_shared<KnnPredictor>(data, spec.knn_k);
      break;
    case LearnerKind::additive:
      raw = std::make_shared<AdditivePredictor>(detail::fit_additive(data, spec, probability));
      break;
    case LearnerKind::ensemble:
      if (data.size() < 2 * kHoldoutMin) {
        raw = std::make_shared<ConstantPredictor>(data.y.mean());
        break;
      }
      return fit_ensemble(data, spec.candidates, probability, clip_delta).predictor;
  }
  if (probability) return std::make_shared<ClippedPredictor>(raw, clip_delta);
  return raw;
}

// Weights and tuning-fold losses of an ensemble fit, for diagnostics.
struct FitReport {
  std::vector<double> weights;
  std::vector<double> candidate_tuning_loss;
  double tuning_loss = 0.0;
};

struct ReportedFit {
  PredictorPtr predictor;
  std::optional<FitReport> report;
};

namespace detail {

inline std::optional<ReportedFit> fit_reported(const Dataset& data, const LearnerSpec& spec, bool probability,
                                               double clip_delta) {
  if (spec.kind == LearnerKind::ensemble && data.size() >= 2 * kHoldoutMin) {
    if (probability) {
      const double treated = data.y.sum();
      if (treated == 0.0 || treated == static_cast<double>(data.size())) return std::nullopt;
    }
    EnsembleFit fit = fit_ensemble(data, spec.candidates, probability, clip_delta);
    return ReportedFit{fit.predictor, FitReport{fit.weights, fit.candidate_tuning_loss, fit.tuning_loss}};
  }
  auto fit = fit_learner(data, spec, probability, clip_delta);
  if (!fit) return std::nullopt;
  return ReportedFit{*fit, std::nullopt};
}

inline std::optional<ReportedFit> fit_outcome_reported(const Dataset& arm_data, const LearnerSpec& spec) {
  if (arm_data.size() == 0) return std::nullopt;
  if (static_cast<std::size_t>(arm_data.size()) < kColdStartMin)
    return fit_reported(arm_data, LearnerSpec::mean_only(), false, 0.0);
  return fit_reported(arm_data, spec, false, 0.0);
}

}  // namespace detail

// Regression of Y on X within one arm. nullopt on an empty arm; below
// kColdStartMin rows the arm mean is used whatever the spec.
inline std::optional<PredictorPtr> fit_outcome(const Dataset& arm_data, const LearnerSpec& spec) {
  auto fit = detail::fit_outcome_reported(arm_data, spec);
  if (!fit) return std::nullopt;
  return fit->predictor;
}

// Propensity score P(A = 1 | X), clipped. nullopt unless both labels occur.
inline std::optional<PredictorPtr> fit_propensity(const Dataset& labels, const LearnerSpec& spec,
                                                  double clip_delta = 0.01) {
  if (!(clip_delta > 0.0 && clip_delta < 0.5)) throw DomainError("fit_propensity: clip delta must lie in (0, 0.5)");
  return fit_learner(labels, spec, true, clip_delta);
}

struct NuisanceConfig {
  LearnerSpec outcome = LearnerSpec::default_outcome_ensemble();
  LearnerSpec propensity = LearnerSpec::default_propensity_ensemble();
  double clip_delta = 0.01;
  bool estimate_propensity = false;  // false: use each record's known propensity
};

// Fitted nuisance triple. `pi` is null when propensities are known by design.
struct NuisanceFit {
  PredictorPtr mu1;
  PredictorPtr mu0;
  PredictorPtr pi;
  std::uint64_t fitted_on = 0;
  double clip_delta = 0.01;
  std::optional<FitReport> mu1_report;
  std::optional<FitReport> mu0_report;
  std::optional<FitReport> pi_report;

  double mu(int arm, std::span<const double> x) const { return arm == 1 ? mu1->predict(x) : mu0->predict(x); }
};

// Fit on exactly the given records (a prefix of the training stream).
// nullopt until each arm has at least one record, and, when the propensity
// is estimated, until both labels occur.
inline std::optional<NuisanceFit> fit_nuisance(std::span<const Observation> training, const NuisanceConfig& config) {
  if (training.empty()) return std::nullopt;
  if (config.estimate_propensity && !(config.clip_delta > 0.0 && config.clip_delta < 0.5))
    throw DomainError("fit_nuisance: clip delta must lie in (0, 0.5)");
  auto mu1 = detail::fit_outcome_reported(outcome_dataset(training, 1), config.outcome);
  if (!mu1) return std::nullopt;
  auto mu0 = detail::fit_outcome_reported(outcome_dataset(training, 0), config.outcome);
  if (!mu0) return std::nullopt;
  NuisanceFit fit;
  fit.mu1 = mu1->predictor;
  fit.mu0 = mu0->predictor;
  fit.mu1_report = mu1->report;
  fit.mu0_report = mu0->report;
  fit.fitted_on = training.size();
  fit.clip_delta = config.clip_delta;
  if (config.estimate_propensity) {
    auto pi = detail::fit_reported(treatment_dataset(training), config.propensity, true, config.clip_delta);
    if (!pi) return std::nullopt;
    fit.pi = pi->predictor;
    fit.pi_report = pi->report;
  }
  return fit;
}

}  // namespace seqdr::nuisance
