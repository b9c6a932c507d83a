#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <string_view>

#include "qgmm/errors.hpp"
#include "qgmm/linalg.hpp"

namespace qgmm {

enum class PriorFamily { Normal, NigHomo, NigHetero };

inline std::string_view to_string(PriorFamily f) {
  switch (f) {
    case PriorFamily::Normal: return "normal";
    case PriorFamily::NigHomo: return "nig-homo";
    case PriorFamily::NigHetero: return "nig-hetero";
  }
  return "unknown";
}

inline PriorFamily parse_prior_family(std::string_view s) {
  if (s == "normal") return PriorFamily::Normal;
  if (s == "nig-homo") return PriorFamily::NigHomo;
  if (s == "nig-hetero") return PriorFamily::NigHetero;
  throw InvalidArgument("unknown prior family '" + std::string(s) + "'");
}

/// Prior family and the inverse-gamma shape/rate (nu1, nu2) of the variance
/// hyperparameters. The Normal family ignores nu1 and nu2.
struct PriorSpec {
  PriorFamily family = PriorFamily::Normal;
  double nu1 = 2.0;
  double nu2 = 1.0;

  void validate() const {
    if (!(nu1 > 0.0) || !(nu2 > 0.0)) throw InvalidArgument("prior: nu1 and nu2 must be positive");
  }
};

/// Draws from InvGamma(shape, rate), density proportional to x^{-shape-1} exp(-rate/x).
template <typename Rng>
double sample_inverse_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  return rate / gamma(rng);
}

/// Prior over theta given the current hyperparameters tau.
///
/// theta | tau ~ N(0, Q^{-1}) with Q = I (Normal), tau^{-1} I (NIG-homo) or
/// diag(1/tau_j) (NIG-hetero); tau_j ~ InvGamma(nu1, nu2) for the NIG families.
class PriorState {
 public:
  PriorState(PriorSpec spec, Vector tau) : spec_(spec), tau_(std::move(tau)) { validate(); }

  /// Hyperparameters start at the inverse-gamma mean nu2/(nu1 - 1), or 1 when nu1 <= 1.
  static PriorState initial(const PriorSpec& spec, Eigen::Index k) {
    spec.validate();
    const double tau0 = spec.nu1 > 1.0 ? spec.nu2 / (spec.nu1 - 1.0) : 1.0;
    switch (spec.family) {
      case PriorFamily::Normal: return PriorState(spec, Vector());
      case PriorFamily::NigHomo: return PriorState(spec, Vector::Constant(1, tau0));
      case PriorFamily::NigHetero: return PriorState(spec, Vector::Constant(k, tau0));
    }
    throw InvalidArgument("prior: unknown family");
  }

  const PriorSpec& spec() const { return spec_; }
  PriorFamily family() const { return spec_.family; }
  const Vector& tau() const { return tau_; }

  /// Diagonal of Q for a k-dimensional theta.
  Vector precision_diagonal(Eigen::Index k) const {
    switch (spec_.family) {
      case PriorFamily::Normal: return Vector::Ones(k);
      case PriorFamily::NigHomo: return Vector::Constant(k, 1.0 / tau_(0));
      case PriorFamily::NigHetero:
        if (tau_.size() != k) throw InvalidArgument("prior: tau length does not match k");
        return tau_.cwiseInverse();
    }
    throw InvalidArgument("prior: unknown family");
  }

  Matrix precision(Eigen::Index k) const { return precision_diagonal(k).asDiagonal(); }

  /// -1/2 theta'Q theta + 1/2 log|Q|, dropping constants free of theta and tau.
  double log_density(const Vector& theta) const {
    const Vector q = precision_diagonal(theta.size());
    return -0.5 * theta.cwiseAbs2().dot(q) + 0.5 * q.array().log().sum();
  }

  /// One Gibbs draw of tau from its normal-inverse-gamma full conditional.
  template <typename Rng>
  PriorState gibbs_update(const Vector& theta, Rng& rng) const {
    const double nu1 = spec_.nu1;
    const double nu2 = spec_.nu2;
    switch (spec_.family) {
      case PriorFamily::Normal: return *this;
      case PriorFamily::NigHomo: {
        const double shape = nu1 + 0.5 * static_cast<double>(theta.size());
        const double rate = nu2 + 0.5 * theta.squaredNorm();
        return PriorState(spec_, Vector::Constant(1, sample_inverse_gamma(shape, rate, rng)));
      }
      case PriorFamily::NigHetero: {
        if (theta.size() != tau_.size()) throw InvalidArgument("prior: tau length does not match k");
        Vector tau(theta.size());
        for (Eigen::Index j = 0; j < theta.size(); ++j)
          tau(j) = sample_inverse_gamma(nu1 + 0.5, nu2 + 0.5 * theta(j) * theta(j), rng);
        return PriorState(spec_, std::move(tau));
      }
    }
    throw InvalidArgument("prior: unknown family");
  }

 private:
  void validate() const {
    spec_.validate();
    const Eigen::Index expected_min = spec_.family == PriorFamily::Normal ? 0 : 1;
    if (spec_.family == PriorFamily::Normal && tau_.size() != 0)
      throw InvalidArgument("prior: Normal family takes no hyperparameters");
    if (spec_.family == PriorFamily::NigHomo && tau_.size() != 1)
      throw InvalidArgument("prior: NIG-homo takes exactly one hyperparameter");
    if (tau_.size() < expected_min) throw InvalidArgument("prior: missing hyperparameters");
    if (tau_.size() > 0 && !((tau_.array() > 0.0).all() && tau_.allFinite()))
      throw InvalidArgument("prior: tau entries must be positive and finite");
  }

  PriorSpec spec_;
  Vector tau_;
};

}  // namespace qgmm
