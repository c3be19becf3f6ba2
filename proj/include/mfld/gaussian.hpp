#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "mfld/errors.hpp"
#include "mfld/extended_real.hpp"

namespace mfld {

/// Gaussian measure N(mean, covariance). The covariance may be singular
/// (degenerate laws such as Dirac flows are allowed) but must be symmetric
/// within 1e-12 and have no eigenvalue below -1e-10.
class GaussianMeasure {
 public:
  GaussianMeasure() = default;

  GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
      : mean_(std::move(mean)), cov_(std::move(covariance)) {
    const auto n = mean_.size();
    if (cov_.rows() != n || cov_.cols() != n)
      throw DomainError("covariance is " + std::to_string(cov_.rows()) + "x" + std::to_string(cov_.cols()) +
                        " but the mean has length " + std::to_string(n));
    if (!mean_.allFinite() || !cov_.allFinite()) throw DomainError("non-finite Gaussian parameters");
    const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
    if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw DomainError("covariance is not symmetric");
    if (n > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < -1e-10 * scale) throw DomainError("covariance is not positive semidefinite");
    }
  }

  static GaussianMeasure standard(Eigen::Index n) {
    return GaussianMeasure(Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n));
  }

  Eigen::Index dimension() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
};

/// R(theta1 || theta2) in closed form:
///   1/2 [ tr(S2^-1 S1) + (m2-m1)' S2^-1 (m2-m1) - n - log det(S2^-1 S1) ].
/// theta2 must be nondegenerate. A degenerate theta1 is singular with respect
/// to theta2 and yields +inf.
inline ExtendedReal gaussian_relative_entropy(const GaussianMeasure& theta1, const GaussianMeasure& theta2) {
  const Eigen::Index n = theta1.dimension();
  if (theta2.dimension() != n) throw DomainError("Gaussian relative entropy: dimension mismatch");
  if (n == 0) return ExtendedReal::finite(0.0);

  Eigen::LLT<Eigen::MatrixXd> chol2(theta2.covariance());
  if (chol2.info() != Eigen::Success) throw DomainError("reference covariance is singular");
  const Eigen::MatrixXd l2 = chol2.matrixL();
  const double scale2 = l2.diagonal().cwiseAbs().maxCoeff();
  if (l2.diagonal().cwiseAbs().minCoeff() <= 1e-10 * scale2) throw DomainError("reference covariance is singular");

  const Eigen::VectorXd delta = theta2.mean() - theta1.mean();
  const Eigen::VectorXd w = l2.triangularView<Eigen::Lower>().solve(delta);
  const double quad = w.squaredNorm();

  if (theta1.covariance() == theta2.covariance()) return ExtendedReal::finite(0.5 * quad);

  Eigen::LLT<Eigen::MatrixXd> chol1(theta1.covariance());
  if (chol1.info() != Eigen::Success) return ExtendedReal::infinity();
  const Eigen::MatrixXd l1 = chol1.matrixL();
  if (l1.diagonal().minCoeff() <= 1e-12 * std::max(1.0, l1.diagonal().maxCoeff())) return ExtendedReal::infinity();

  const Eigen::MatrixXd m = l2.triangularView<Eigen::Lower>().solve(l1);
  const double trace = m.squaredNorm();
  const double logdet1 = 2.0 * l1.diagonal().array().log().sum();
  const double logdet2 = 2.0 * l2.diagonal().array().log().sum();
  const double value = 0.5 * (trace + quad - static_cast<double>(n) + logdet2 - logdet1);
  return ExtendedReal::finite(std::max(0.0, value));
}

}  // namespace mfld
