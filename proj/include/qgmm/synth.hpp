#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

#include "qgmm/errors.hpp"
#include "qgmm/linalg.hpp"
#include "qgmm/moment_model.hpp"
#include "qgmm/random.hpp"

namespace qgmm::synth {

/// Heteroskedastic regression benchmark: n observations, k coefficients (intercept included).
struct SynthConfig {
  Eigen::Index n = 100;
  Eigen::Index k = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (k < 3) throw InvalidArgument("synth: k must be at least 3");
    if (n <= k) throw InvalidArgument("synth: need n > k");
  }
};

/// Draw from IW(I_dim, dof) by the Bartlett decomposition of the Wishart factor.
template <typename Engine>
Matrix sample_inverse_wishart(Eigen::Index dim, double dof, Engine& rng) {
  if (dim < 1) throw InvalidArgument("inverse Wishart: dim must be positive");
  if (!(dof > static_cast<double>(dim - 1))) throw InvalidArgument("inverse Wishart: need dof > dim - 1");
  std::normal_distribution<double> normal;
  Matrix a = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    std::chi_squared_distribution<double> chi2(dof - static_cast<double>(i));
    a(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  // Wishart = A A', so its inverse is A^{-T} A^{-1}.
  const Matrix a_inv = a.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim, dim));
  Matrix out = a_inv.transpose() * a_inv;
  symmetrize(out);
  return out;
}

/// D S D with D = diag(s_jj^{-1/2}).
inline Matrix to_correlation(const Matrix& s) {
  if (s.rows() != s.cols()) throw InvalidArgument("to_correlation: matrix must be square");
  if (!(s.diagonal().array() > 0.0).all()) throw InvalidArgument("to_correlation: non-positive diagonal entry");
  const Vector d = s.diagonal().cwiseSqrt().cwiseInverse();
  Matrix out = d.asDiagonal() * s * d.asDiagonal();
  symmetrize(out);
  out.diagonal().setOnes();
  return out;
}

/// sigma_i^2 = (1 + x_{i,2}^2 + x_{i,3}^2) / 3, where x_{i,2}, x_{i,3} are the
/// first two non-constant covariates.
inline double error_variance(double x2, double x3) { return (1.0 + x2 * x2 + x3 * x3) / 3.0; }

/// theta = (1, 1, 1, 0, ..., 0)
inline Vector true_coefficients(Eigen::Index k) {
  Vector theta = Vector::Zero(k);
  theta.head(3).setOnes();
  return theta;
}

struct Generated {
  Dataset data;
  Vector true_theta;
  /// Covariate correlation matrix used for this draw.
  Matrix covariate_correlation;
};

/// x_i = (1, x~_i')' with x~_i ~ N(0, S), S the normalized IW(I_{k-1}, k+1) draw;
/// y_i ~ N(theta' x_i, sigma_i^2); Z = X.
inline Generated generate(const SynthConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, Stream::Data);
  const Eigen::Index d = config.k - 1;
  const Matrix s = to_correlation(sample_inverse_wishart(d, static_cast<double>(config.k + 1), rng));
  const Matrix s_factor = s.llt().matrixL();

  const Vector theta = true_coefficients(config.k);
  Matrix x(config.n, config.k);
  Vector y(config.n);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < config.n; ++i) {
    const Vector xt = s_factor * standard_normal_vector(d, rng);
    x(i, 0) = 1.0;
    x.row(i).tail(d) = xt.transpose();
    const double sd = std::sqrt(error_variance(xt(0), xt(1)));
    y(i) = x.row(i).dot(theta) + sd * normal(rng);
  }
  return Generated{Dataset::regression(std::move(y), std::move(x)), theta, s};
}

}  // namespace qgmm::synth
