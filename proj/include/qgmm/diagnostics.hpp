#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qgmm/errors.hpp"
#include "qgmm/linalg.hpp"

namespace qgmm {

inline constexpr Eigen::Index kMinDraws = 16;
/// mESS above this multiple of the draw count indicates a numerical fault.
inline constexpr double kMaxEfficiency = 1.5;

struct MessReport {
  double mess = 0.0;
  double mess_per_iter = 0.0;
  /// 0 when no sampling time was supplied.
  double mess_per_sec = 0.0;
  std::size_t batch_size = 0;
  std::size_t p = 0;
  /// mess exceeded kMaxEfficiency times the number of draws.
  bool numerical_fault = false;
};

/// Sample covariance with divisor m - 1.
inline Matrix sample_covariance(const Matrix& draws) {
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Matrix centered = draws.rowwise() - mean;
  Matrix cov = centered.transpose() * centered / static_cast<double>(draws.rows() - 1);
  symmetrize(cov);
  return cov;
}

/// Multivariate batch-means estimate of the asymptotic covariance of the chain mean.
///
/// Batch size b = floor(sqrt(m)), a = floor(m / b) batches; trailing rows that
/// do not fill a batch are dropped.
inline Matrix batch_means_cov(const Matrix& draws) {
  const Eigen::Index m = draws.rows();
  if (m < kMinDraws) throw TooFewDraws("batch_means_cov: need at least 16 draws");
  const auto b = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(m))));
  const Eigen::Index a = m / b;
  Matrix batch_means(a, draws.cols());
  for (Eigen::Index j = 0; j < a; ++j) batch_means.row(j) = draws.middleRows(j * b, b).colwise().mean();
  const Eigen::RowVectorXd grand = batch_means.colwise().mean();
  const Matrix centered = batch_means.rowwise() - grand;
  Matrix sigma = centered.transpose() * centered * (static_cast<double>(b) / static_cast<double>(a - 1));
  symmetrize(sigma);
  return sigma;
}

inline std::size_t batch_size_for(Eigen::Index m) {
  return static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m))));
}

/// mESS = m (det Lambda / det Sigma)^{1/p} with Lambda the sample covariance and
/// Sigma the batch-means covariance, via Cholesky log-determinants.
inline MessReport mess(const Matrix& draws, double sampling_seconds = 0.0) {
  const Eigen::Index m = draws.rows();
  if (m < kMinDraws) throw TooFewDraws("mess: need at least 16 draws");
  const auto lambda = try_jittered_cholesky(sample_covariance(draws));
  const auto sigma = try_jittered_cholesky(batch_means_cov(draws));
  if (!lambda || !sigma) throw SingularCovariance("mess: covariance estimate is not positive definite");

  const auto p = static_cast<double>(draws.cols());
  MessReport report;
  report.p = static_cast<std::size_t>(draws.cols());
  report.batch_size = batch_size_for(m);
  report.mess = static_cast<double>(m) * std::exp((lambda->log_det() - sigma->log_det()) / p);
  report.mess_per_iter = report.mess / static_cast<double>(m);
  report.mess_per_sec = sampling_seconds > 0.0 ? report.mess / sampling_seconds : 0.0;
  report.numerical_fault = !(report.mess_per_iter <= kMaxEfficiency);
  return report;
}

namespace detail {

inline double lower_median(std::vector<double> values) {
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

}  // namespace detail

/// Component-wise (lower) median over runs.
inline MessReport median_across_runs(const std::vector<MessReport>& reports) {
  if (reports.empty()) throw InvalidArgument("median_across_runs: no reports");
  std::vector<double> mess_values, per_iter, per_sec;
  for (const auto& r : reports) {
    mess_values.push_back(r.mess);
    per_iter.push_back(r.mess_per_iter);
    per_sec.push_back(r.mess_per_sec);
  }
  MessReport out = reports.front();
  out.mess = detail::lower_median(std::move(mess_values));
  out.mess_per_iter = detail::lower_median(std::move(per_iter));
  out.mess_per_sec = detail::lower_median(std::move(per_sec));
  out.numerical_fault = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.numerical_fault; });
  return out;
}

}  // namespace qgmm
