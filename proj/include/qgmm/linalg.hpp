#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>

#include "qgmm/errors.hpp"

namespace qgmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Lower-triangular Cholesky factor L of a symmetric positive-definite matrix A = L L'.
///
/// Every use of A^{-1} goes through triangular solves against L; the inverse is
/// never formed.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(Matrix lower, double jitter = 0.0)
      : lower_(std::move(lower)), jitter_(jitter) {}

  const Matrix& lower() const { return lower_; }
  Eigen::Index dim() const { return lower_.rows(); }

  /// Diagonal shift that was needed to factorize (0 when none).
  double jitter() const { return jitter_; }

  /// log|A| = 2 sum log L_jj.
  double log_det() const { return 2.0 * lower_.diagonal().array().log().sum(); }

  /// L^{-1} b
  template <typename Derived>
  Matrix solve_lower(const Eigen::MatrixBase<Derived>& b) const {
    return lower_.triangularView<Eigen::Lower>().solve(b);
  }

  /// L'^{-1} b
  template <typename Derived>
  Matrix solve_upper(const Eigen::MatrixBase<Derived>& b) const {
    return lower_.transpose().triangularView<Eigen::Upper>().solve(b);
  }

  /// A^{-1} b
  template <typename Derived>
  Matrix solve(const Eigen::MatrixBase<Derived>& b) const {
    return solve_upper(solve_lower(b));
  }

  /// b' A^{-1} b for a vector b.
  double inverse_quadratic(const Vector& b) const { return solve_lower(b).squaredNorm(); }

  /// Reconstructs A; for tests and diagnostics.
  Matrix reconstruct() const { return lower_ * lower_.transpose(); }

 private:
  Matrix lower_;
  double jitter_ = 0.0;
};

/// Number of x10 escalations applied after the first jittered attempt.
inline constexpr int kJitterEscalations = 3;
inline constexpr double kJitterScale = 1e-10;

/// Plain LLT without any repair.
inline std::optional<CholeskyFactor> try_cholesky(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Matrix lower = llt.matrixL();
  if (!lower.diagonal().allFinite() || (lower.diagonal().array() <= 0.0).any()) return std::nullopt;
  return CholeskyFactor(std::move(lower));
}

/// Cholesky with scale-aware jitter: tries A, then A + lambda I for
/// lambda = 1e-10 trace(A)/k, escalating x10 up to three times.
inline std::optional<CholeskyFactor> try_jittered_cholesky(const Matrix& a) {
  if (!a.allFinite()) return std::nullopt;
  if (auto f = try_cholesky(a)) return f;
  const auto k = static_cast<double>(a.rows());
  double lambda = kJitterScale * a.trace() / k;
  if (!(lambda > 0.0)) return std::nullopt;
  for (int attempt = 0; attempt <= kJitterEscalations; ++attempt, lambda *= 10.0) {
    Matrix shifted = a;
    shifted.diagonal().array() += lambda;
    if (auto f = try_cholesky(shifted)) return CholeskyFactor(f->lower(), lambda);
  }
  return std::nullopt;
}

/// Symmetrizes in place as (A + A')/2.
inline void symmetrize(Matrix& a) { a = 0.5 * (a + a.transpose()).eval(); }

/// log N(x | mean, P^{-1}) where P = R R' is a precision matrix given by its factor.
inline double log_normal_density_precision(const Vector& x, const Vector& mean,
                                           const CholeskyFactor& precision) {
  const auto k = static_cast<double>(x.size());
  const Vector r = precision.lower().transpose() * (x - mean);
  return -0.5 * k * std::log(2.0 * std::numbers::pi) + 0.5 * precision.log_det() - 0.5 * r.squaredNorm();
}

/// Rank-one update of a lower Cholesky factor in place: L L' <- L L' + sign * v v'.
/// Returns false (leaving L untouched) if a downdate would lose positive definiteness.
inline bool cholesky_rank_one(Matrix& lower, Vector v, double sign) {
  const Eigen::Index n = lower.rows();
  Matrix out = lower;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double ljj = out(j, j);
    const double r2 = ljj * ljj + sign * v(j) * v(j);
    if (!(r2 > 0.0)) return false;
    const double r = std::sqrt(r2);
    const double c = r / ljj;
    const double s = v(j) / ljj;
    out(j, j) = r;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      out(i, j) = (out(i, j) + sign * s * v(i)) / c;
      v(i) = c * v(i) - s * out(i, j);
    }
  }
  if (!out.allFinite()) return false;
  lower = std::move(out);
  return true;
}

}  // namespace qgmm
