#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

#include "qgmm/moment_model.hpp"

namespace fixtures {

using qgmm::Dataset;
using qgmm::Matrix;
using qgmm::Vector;

/// Heteroskedastic regression with an intercept and k - 1 standard normal covariates.
inline Dataset random_regression(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(n, k);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < k; ++j) x(i, j) = normal(rng);
    const double sd = std::sqrt((1.0 + x(i, std::min<Eigen::Index>(1, k - 1)) * x(i, std::min<Eigen::Index>(1, k - 1))) / 2.0);
    y(i) = x.row(i).sum() * 0.5 + sd * normal(rng);
  }
  return Dataset::regression(std::move(y), std::move(x));
}

/// IV design: the first regressor is endogenous, the first instrument is its
/// excluded instrument; remaining columns are shared controls.
inline Dataset random_iv(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(n, k);
  Matrix z(n, k);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double instr = normal(rng);
    const double confounder = normal(rng);
    z(i, 0) = instr;
    x(i, 0) = 0.8 * instr + confounder + 0.3 * normal(rng);
    for (Eigen::Index j = 1; j < k; ++j) x(i, j) = z(i, j) = normal(rng);
    y(i) = 1.5 * x(i, 0) + x.row(i).tail(k - 1).sum() + confounder + normal(rng);
  }
  return Dataset(std::move(y), std::move(x), std::move(z));
}

/// One-parameter heteroskedastic model: y_i = 0.5 x_i + sqrt((1 + x_i^2)/3) e_i, x_i ~ N(1, 1).
inline Dataset scalar_heteroskedastic(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(n, 1);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0 + normal(rng);
    y(i) = 0.5 * x(i, 0) + std::sqrt((1.0 + x(i, 0) * x(i, 0)) / 3.0) * normal(rng);
  }
  return Dataset::regression(std::move(y), std::move(x));
}

}  // namespace fixtures
