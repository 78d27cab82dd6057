#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "seqdr/error.hpp"

namespace seqdr::numerics {

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kEigenClampTol = 1e-10;

// Largest absolute eigenvalue of a symmetric matrix.
inline double opnorm(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.rows() != a.cols()) throw DomainError("opnorm: matrix must be square");
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

// Symmetric positive semidefinite matrix. Construction checks symmetry to
// kSymmetryTol (scaled by the largest entry) and clamps eigenvalues in
// [-kEigenClampTol, 0) to zero; anything more negative is rejected.
class PsdMatrix {
 public:
  PsdMatrix() = default;

  explicit PsdMatrix(const Eigen::Ref<const Eigen::MatrixXd>& a) {
    if (a.rows() != a.cols() || a.rows() == 0) throw DomainError("PsdMatrix: must be square, dim >= 1");
    if (!a.allFinite()) throw DomainError("PsdMatrix: non-finite entries");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
      throw DomainError("PsdMatrix: matrix is not symmetric");
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    eig_.compute(sym);
    values_ = eig_.eigenvalues();
    const double clamp = kEigenClampTol * std::max(1.0, values_.cwiseAbs().maxCoeff());
    if (values_.minCoeff() < -clamp) throw DomainError("PsdMatrix: matrix is indefinite");
    values_ = values_.cwiseMax(0.0);
    entries_ = eig_.eigenvectors() * values_.asDiagonal() * eig_.eigenvectors().transpose();
  }

  Eigen::Index dim() const { return entries_.rows(); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  const Eigen::VectorXd& eigenvalues() const { return values_; }
  const Eigen::MatrixXd& eigenvectors() const { return eig_.eigenvectors(); }

 private:
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
  Eigen::VectorXd values_;
  Eigen::MatrixXd entries_;
};

// Principal square root through the eigendecomposition.
inline PsdMatrix psd_sqrt(const PsdMatrix& a) {
  const Eigen::MatrixXd& v = a.eigenvectors();
  const Eigen::MatrixXd root = v * a.eigenvalues().cwiseSqrt().asDiagonal() * v.transpose();
  return PsdMatrix(0.5 * (root + root.transpose()));
}

inline PsdMatrix psd_sqrt(const Eigen::Ref<const Eigen::MatrixXd>& a) { return psd_sqrt(PsdMatrix(a)); }

}  // namespace seqdr::numerics
