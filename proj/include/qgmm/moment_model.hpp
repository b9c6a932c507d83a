#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>

#include "qgmm/errors.hpp"
#include "qgmm/linalg.hpp"

namespace qgmm {

/// Outcome y (n), regressors X (n x k) and instruments Z (n x k).
/// For plain regression Z == X.
class Dataset {
 public:
  /// Validates shapes and that Z'X is invertible. With `add_intercept` a
  /// constant-1 column is prepended to both X and Z before validation.
  Dataset(Vector y, Matrix x, Matrix z, bool add_intercept = false)
      : y_(std::move(y)), x_(std::move(x)), z_(std::move(z)) {
    if (add_intercept) {
      x_ = prepend_ones(x_);
      z_ = prepend_ones(z_);
    }
    validate();
  }

  /// Plain regression: instruments are the regressors.
  static Dataset regression(Vector y, Matrix x, bool add_intercept = false) {
    Matrix z = x;
    return Dataset(std::move(y), std::move(x), std::move(z), add_intercept);
  }

  const Vector& y() const { return y_; }
  const Matrix& x() const { return x_; }
  const Matrix& z() const { return z_; }
  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index k() const { return x_.cols(); }

 private:
  static Matrix prepend_ones(const Matrix& m) {
    Matrix out(m.rows(), m.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(m.cols()) = m;
    return out;
  }

  void validate() const {
    if (x_.rows() != y_.size() || z_.rows() != y_.size())
      throw InvalidArgument("dataset: y, X and Z must have the same number of rows");
    if (z_.cols() != x_.cols())
      throw InvalidArgument("dataset: model must be exactly identified (Z and X need the same column count)");
    if (x_.cols() < 1) throw InvalidArgument("dataset: need at least one regressor");
    if (x_.rows() <= x_.cols()) throw InvalidArgument("dataset: need n > k");
    if (!y_.allFinite() || !x_.allFinite() || !z_.allFinite())
      throw InvalidArgument("dataset: non-finite entries");
    Eigen::FullPivLU<Matrix> lu(z_.transpose() * x_);
    if (!lu.isInvertible()) throw RankDeficient("dataset: Z'X is singular");
  }

  Vector y_;
  Matrix x_;
  Matrix z_;
};

/// Linear, exactly identified moment condition m_i(theta) = z_i (y_i - x_i' theta).
///
/// Immutable after construction; every theta-dependent evaluation allocates its
/// own workspace, so one instance can back several chains concurrently.
class MomentModel {
 public:
  explicit MomentModel(Dataset data) : data_(std::move(data)) {
    const auto& z = data_.z();
    ztx_ = z.transpose() * data_.x();
    zty_ = z.transpose() * data_.y();
    g_ = ztx_ / static_cast<double>(n());
    pivot_ = ztx_.partialPivLu().solve(zty_);
    const double scale = ztx_.norm() * pivot_.norm() + zty_.norm();
    if (!pivot_.allFinite() || (ztx_ * pivot_ - zty_).norm() > 1e-8 * scale)
      throw RankDeficient("moment model: Z'X too ill-conditioned to solve for the pivot");
  }

  const Dataset& data() const { return data_; }
  Eigen::Index n() const { return data_.n(); }
  Eigen::Index k() const { return data_.k(); }

  /// G = Z'X / n
  const Matrix& jacobian() const { return g_; }
  /// Z'X (unscaled)
  const Matrix& ztx() const { return ztx_; }
  /// Z'y
  const Vector& zty() const { return zty_; }
  /// Root of the sample moments, (Z'X)^{-1} Z'y. OLS when Z = X, 2SLS for exactly identified IV.
  const Vector& pivot() const { return pivot_; }

  /// z_i (y_i - x_i' theta)
  Vector moment_contribution(Eigen::Index i, const Vector& theta) const {
    if (i < 0 || i >= n()) throw InvalidArgument("moment_contribution: row index out of range");
    check_theta(theta);
    const double resid = data_.y()(i) - data_.x().row(i).dot(theta);
    return data_.z().row(i).transpose() * resid;
  }

  /// n^{-1} Z'(y - X theta), from the cached cross-products.
  Vector mean_moment(const Vector& theta) const {
    check_theta(theta);
    return (zty_ - ztx_ * theta) / static_cast<double>(n());
  }

  /// Sample covariance of the moment contributions, divisor n - 1.
  Matrix moment_covariance(const Vector& theta) const {
    check_theta(theta);
    const Vector resid = data_.y() - data_.x() * theta;
    Matrix dev = data_.z().array().colwise() * resid.array();
    const Eigen::RowVectorXd mean = dev.colwise().mean();
    dev.rowwise() -= mean;
    Matrix v = Matrix::Zero(k(), k());
    v.selfadjointView<Eigen::Lower>().rankUpdate(dev.transpose(), 1.0 / static_cast<double>(n() - 1));
    v = v.selfadjointView<Eigen::Lower>();
    symmetrize(v);
    return v;
  }

  /// Cholesky factor of V(theta) (W = V^{-1}), or nullopt when even the
  /// jittered factorization fails. In fixed-weighting mode the frozen factor
  /// is returned for every theta.
  std::optional<CholeskyFactor> try_weighting_cholesky(const Vector& theta) const {
    if (fixed_weighting_) return fixed_weighting_;
    return try_jittered_cholesky(moment_covariance(theta));
  }

  CholeskyFactor weighting_cholesky(const Vector& theta) const {
    auto f = try_weighting_cholesky(theta);
    if (!f) throw SingularWeighting("weighting matrix: V(theta) is not positive definite after jitter");
    return *std::move(f);
  }

  /// Copy of this model whose weighting matrix is frozen to the given factor of V.
  /// With W constant the quasi-posterior under a Gaussian prior is exactly Gaussian.
  MomentModel with_fixed_weighting(CholeskyFactor factor) const {
    if (factor.dim() != k()) throw InvalidArgument("with_fixed_weighting: factor has wrong dimension");
    MomentModel copy = *this;
    copy.fixed_weighting_ = std::move(factor);
    return copy;
  }

  /// Frozen at V(pivot).
  MomentModel with_fixed_weighting() const { return with_fixed_weighting(weighting_cholesky(pivot_)); }

  bool has_fixed_weighting() const { return fixed_weighting_.has_value(); }

 private:
  void check_theta(const Vector& theta) const {
    if (theta.size() != k()) throw InvalidArgument("theta has the wrong length");
  }

  Dataset data_;
  Matrix ztx_;
  Vector zty_;
  Matrix g_;
  Vector pivot_;
  std::optional<CholeskyFactor> fixed_weighting_;
};

/// Upsilon = n G' W G, formed as n (L^{-1} G)'(L^{-1} G) with W = (L L')^{-1}.
inline Matrix proposal_precision(const MomentModel& model, const CholeskyFactor& weighting) {
  const Matrix a = weighting.solve_lower(model.jacobian());
  Matrix upsilon = Matrix::Zero(model.k(), model.k());
  upsilon.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose(), static_cast<double>(model.n()));
  upsilon = upsilon.selfadjointView<Eigen::Lower>();
  return upsilon;
}

}  // namespace qgmm
