#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "seqdr/error.hpp"
#include "seqdr/numerics/linalg.hpp"

namespace seqdr::numerics {

// Streaming count / mean / centered sum of squares (Welford, Chan merge).
// variance() divides by count, not count - 1.
class RunningMoments {
 public:
  RunningMoments() = default;

  void push(double y) {
    if (!std::isfinite(y)) throw DataError("RunningMoments: non-finite observation");
    ++count_;
    const double delta = y - mean_;
    mean_ += delta / static_cast<double>(count_);
    sum_sq_centered_ += delta * (y - mean_);
  }

  void push(std::span<const double> ys) {
    for (double y : ys) push(y);
  }

  // Moments of the concatenation of both streams.
  static RunningMoments merged(const RunningMoments& a, const RunningMoments& b) {
    if (a.count_ == 0) return b;
    if (b.count_ == 0) return a;
    RunningMoments out;
    out.count_ = a.count_ + b.count_;
    const double na = static_cast<double>(a.count_);
    const double nb = static_cast<double>(b.count_);
    const double n = static_cast<double>(out.count_);
    const double delta = b.mean_ - a.mean_;
    out.mean_ = a.mean_ + delta * nb / n;
    out.sum_sq_centered_ = a.sum_sq_centered_ + b.sum_sq_centered_ + delta * delta * na * nb / n;
    return out;
  }

  std::uint64_t count() const { return count_; }
  double mean() const { return mean_; }
  double sum_sq_centered() const { return sum_sq_centered_; }

  double variance() const {
    if (count_ == 0) return 0.0;
    return std::max(0.0, sum_sq_centered_ / static_cast<double>(count_));
  }
  double stddev() const { return std::sqrt(variance()); }

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double sum_sq_centered_ = 0.0;
};

inline RunningMoments update_moments(RunningMoments state, double y) {
  state.push(y);
  return state;
}

// Vector analogue of RunningMoments; the dimension is fixed by the first update.
class CovMoments {
 public:
  CovMoments() = default;
  explicit CovMoments(Eigen::Index dim)
      : dim_(dim), mean_(Eigen::VectorXd::Zero(dim)), comoment_(Eigen::MatrixXd::Zero(dim, dim)) {}

  void push(const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (dim_ == 0) *this = CovMoments(y.size());
    if (y.size() != dim_) throw DomainError("CovMoments: dimension mismatch");
    if (!y.allFinite()) throw DataError("CovMoments: non-finite observation");
    ++count_;
    const Eigen::VectorXd delta = y - mean_;
    mean_ += delta / static_cast<double>(count_);
    comoment_.noalias() += delta * (y - mean_).transpose();
  }

  std::uint64_t count() const { return count_; }
  Eigen::Index dim() const { return dim_; }
  const Eigen::VectorXd& mean() const { return mean_; }

  // Divide-by-count covariance, symmetrized.
  Eigen::MatrixXd covariance_matrix() const {
    if (count_ == 0) return Eigen::MatrixXd::Zero(dim_, dim_);
    const Eigen::MatrixXd c = comoment_ / static_cast<double>(count_);
    return 0.5 * (c + c.transpose());
  }

  PsdMatrix covariance() const { return PsdMatrix(covariance_matrix()); }

 private:
  std::uint64_t count_ = 0;
  Eigen::Index dim_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd comoment_;
};

}  // namespace seqdr::numerics
