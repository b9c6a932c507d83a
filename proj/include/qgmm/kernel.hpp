#pragma once

#include <cassert>
#include <cmath>
#include <limits>
#include <optional>

#include "qgmm/linalg.hpp"
#include "qgmm/moment_model.hpp"
#include "qgmm/prior.hpp"

namespace qgmm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Log quasi-posterior at theta together with the factor of V(theta) it used.
/// `weighting` is empty exactly when V(theta) was singular and log_target is -inf.
struct TargetEval {
  double log_target = kNegInf;
  /// Quasi-likelihood part of log_target; lets a prior change reuse the factor.
  double log_likelihood = kNegInf;
  std::optional<CholeskyFactor> weighting;
  Vector theta;

  bool singular() const { return !weighting.has_value(); }
};

/// 1/2 log|W| - (n/2) mbar' W mbar for a given factor L of V = W^{-1}.
inline double log_quasi_likelihood(const MomentModel& model, const Vector& theta, const CholeskyFactor& weighting) {
  const Vector mbar = model.mean_moment(theta);
  const double quad = weighting.inverse_quadratic(mbar);
  return -0.5 * weighting.log_det() - 0.5 * static_cast<double>(model.n()) * quad;
}

/// log pi(theta) = 1/2 log|W(theta)| - (n/2) mbar(theta)' W(theta) mbar(theta) + log p(theta).
inline TargetEval log_target(const MomentModel& model, const PriorState& prior, const Vector& theta) {
  TargetEval eval;
  eval.theta = theta;
  eval.weighting = model.try_weighting_cholesky(theta);
  if (!eval.weighting) return eval;
  eval.log_likelihood = log_quasi_likelihood(model, theta, *eval.weighting);
  eval.log_target = eval.log_likelihood + prior.log_density(theta);
  if (!std::isfinite(eval.log_target)) {
    eval.weighting.reset();
    eval.log_likelihood = kNegInf;
    eval.log_target = kNegInf;
  }
  return eval;
}

/// Re-evaluates the prior term of a cached target after the hyperparameters changed.
inline void refresh_prior(TargetEval& eval, const PriorState& prior) {
  if (eval.singular()) return;
  eval.log_target = eval.log_likelihood + prior.log_density(eval.theta);
}

/// Surrogate log pi*(theta_new) with W frozen at the current state's factor. No factorization.
inline double log_surrogate(const MomentModel& model, const PriorState& prior, const Vector& theta_new,
                            const CholeskyFactor& frozen_weighting) {
  return log_quasi_likelihood(model, theta_new, frozen_weighting) + prior.log_density(theta_new);
}

/// log pi*(to) - log pi*(from) under one frozen factor. The 1/2 log|W| prefactor
/// cancels, so it is left out; debug builds cross-check against the full surrogate.
inline double log_surrogate_ratio(const MomentModel& model, const PriorState& prior, const Vector& to,
                                  const Vector& from, const CholeskyFactor& frozen_weighting) {
  const double half_n = 0.5 * static_cast<double>(model.n());
  const double q_to = frozen_weighting.inverse_quadratic(model.mean_moment(to));
  const double q_from = frozen_weighting.inverse_quadratic(model.mean_moment(from));
  const double ratio = -half_n * (q_to - q_from) + prior.log_density(to) - prior.log_density(from);
#ifndef NDEBUG
  const double full = log_surrogate(model, prior, to, frozen_weighting) -
                      log_surrogate(model, prior, from, frozen_weighting);
  assert(!std::isfinite(full) || std::abs(full - ratio) <= 1e-8 * (1.0 + std::abs(full)));
#endif
  return ratio;
}

}  // namespace qgmm
