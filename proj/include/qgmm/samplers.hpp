#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "qgmm/errors.hpp"
#include "qgmm/kernel.hpp"
#include "qgmm/linalg.hpp"
#include "qgmm/moment_model.hpp"
#include "qgmm/prior.hpp"
#include "qgmm/random.hpp"

namespace qgmm {

enum class Algorithm { Ram, DaConventional, MdaExact, MdaApprox };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::Ram, Algorithm::DaConventional, Algorithm::MdaExact,
                                               Algorithm::MdaApprox};

/// Command-line / file name of an algorithm.
inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Ram: return "ram";
    case Algorithm::DaConventional: return "da";
    case Algorithm::MdaExact: return "mda-exact";
    case Algorithm::MdaApprox: return "mda-approx";
  }
  return "unknown";
}

/// Column heading used in benchmark tables.
inline std::string_view display_name(Algorithm a) {
  switch (a) {
    case Algorithm::Ram: return "MCMC";
    case Algorithm::DaConventional: return "DA-MCMC";
    case Algorithm::MdaExact: return "Exact";
    case Algorithm::MdaApprox: return "Approx";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : kAllAlgorithms)
    if (s == to_string(a)) return a;
  throw InvalidArgument("unknown algorithm '" + std::string(s) + "'");
}

/// Which acceptance signal drives the proposal adaptation of conventional DA.
enum class DaAdaptSignal {
  Stage1,  ///< stage-1 acceptance probability
  Final    ///< realized final acceptance indicator
};

struct SamplerConfig {
  Algorithm algorithm = Algorithm::MdaApprox;
  std::size_t total_draws = 200000;
  std::size_t retained_draws = 100000;
  std::uint64_t seed = 0;
  double alpha_star = 0.234;
  double gamma = 2.0 / 3.0;
  /// Initial random-walk factor is initial_scale * I.
  double initial_scale = 0.1;
  DaAdaptSignal da_adapt_on = DaAdaptSignal::Stage1;

  void validate() const {
    if (total_draws == 0) throw InvalidArgument("sampler: total_draws must be positive");
    if (retained_draws == 0 || retained_draws > total_draws)
      throw InvalidArgument("sampler: need 0 < retained_draws <= total_draws");
    if (!(alpha_star > 0.0 && alpha_star < 1.0)) throw InvalidArgument("sampler: alpha_star must lie in (0, 1)");
    if (!(gamma > 0.5 && gamma <= 1.0)) throw InvalidArgument("sampler: gamma must lie in (1/2, 1]");
    if (!(initial_scale > 0.0)) throw InvalidArgument("sampler: initial_scale must be positive");
  }
};

/// Current point of the chain with its cached target evaluation (and W factor).
struct ChainState {
  Vector theta;
  PriorState prior;
  TargetEval target;

  static ChainState at(const MomentModel& model, PriorState prior, const Vector& theta) {
    TargetEval eval = log_target(model, prior, theta);
    return ChainState{theta, std::move(prior), std::move(eval)};
  }

  /// Starts at the pivot with the prior's initial hyperparameters.
  static ChainState initial(const MomentModel& model, const PriorSpec& spec) {
    return at(model, PriorState::initial(spec, model.k()), model.pivot());
  }

  void accept(TargetEval proposal) {
    theta = proposal.theta;
    target = std::move(proposal);
  }
};

/// Robust adaptive Metropolis state: lower-triangular S with S S' the proposal covariance.
struct AdaptState {
  Matrix scale;
  std::size_t iteration = 0;
  double alpha_star = 0.234;
  double gamma = 2.0 / 3.0;

  static AdaptState initial(Eigen::Index k, const SamplerConfig& config) {
    return AdaptState{Matrix::Identity(k, k) * config.initial_scale, 0, config.alpha_star, config.gamma};
  }

  double step_size() const {
    const auto k = static_cast<double>(scale.rows());
    return std::min(1.0, k * std::pow(static_cast<double>(iteration), -gamma));
  }

  /// S S' <- S (I + eta_t (alpha - alpha*) u u' / |u|^2) S', applied as a rank-one
  /// update of the triangular factor. A downdate that would break positive
  /// definiteness leaves S unchanged.
  void update(const Vector& u, double accept_prob) {
    ++iteration;
    const double norm2 = u.squaredNorm();
    const double coef = step_size() * (accept_prob - alpha_star);
    if (norm2 <= 0.0 || coef == 0.0 || !std::isfinite(coef)) return;
    const Vector v = scale * u * std::sqrt(std::abs(coef) / norm2);
    cholesky_rank_one(scale, v, coef > 0.0 ? 1.0 : -1.0);
  }
};

struct StepReport {
  bool stage1_accepted = false;
  bool stage2_accepted = false;
  double log_alpha1 = kNegInf;
  /// Absent for single-stage samplers and when stage 1 rejected.
  std::optional<double> log_alpha2;
  Vector proposal;
  /// The proposal (or its reverse proposal) hit a singular factorization.
  bool singular = false;

  bool accepted() const { return stage2_accepted; }
};

namespace detail {

inline double min0(double x) { return std::isnan(x) ? kNegInf : std::min(0.0, x); }

inline bool accept_with(double log_alpha, Rng& rng) {
  if (log_alpha >= 0.0) return true;
  if (log_alpha == kNegInf) return false;
  return log_uniform(rng) < log_alpha;
}

}  // namespace detail

/// Gaussian stage-1 proposal of the modified DA samplers, stored by precision.
struct GaussianProposal {
  Vector mean;
  CholeskyFactor precision;

  double log_density(const Vector& x) const { return log_normal_density_precision(x, mean, precision); }

  Vector draw(Rng& rng) const {
    const Vector z = standard_normal_vector(mean.size(), rng);
    return mean + precision.solve_upper(z);
  }
};

/// Proposal built from the approximate conditional posterior under the weighting
/// factor `weighting`: N((Upsilon + Q)^{-1} Upsilon pivot, (Upsilon + Q)^{-1}) when
/// `with_prior`, else N(pivot, Upsilon^{-1}). Empty when the precision is not PD.
inline std::optional<GaussianProposal> modified_proposal(const MomentModel& model, const PriorState& prior,
                                                         const CholeskyFactor& weighting, bool with_prior) {
  Matrix precision = proposal_precision(model, weighting);
  if (!with_prior) {
    auto factor = try_cholesky(precision);
    if (!factor) return std::nullopt;
    return GaussianProposal{model.pivot(), *std::move(factor)};
  }
  const Vector upsilon_pivot = precision * model.pivot();
  precision.diagonal() += prior.precision_diagonal(model.k());
  auto factor = try_cholesky(precision);
  if (!factor) return std::nullopt;
  Vector mean = factor->solve(upsilon_pivot);
  if (!mean.allFinite()) return std::nullopt;
  return GaussianProposal{std::move(mean), *std::move(factor)};
}

/// Adaptive random-walk Metropolis step; adapts S on the acceptance probability.
inline StepReport ram_step(ChainState& state, AdaptState& adapt, const MomentModel& model, Rng& rng) {
  StepReport report;
  const Vector u = standard_normal_vector(model.k(), rng);
  report.proposal = state.theta + adapt.scale * u;
  TargetEval proposal = log_target(model, state.prior, report.proposal);
  report.singular = proposal.singular();
  report.log_alpha1 = proposal.singular() ? kNegInf : detail::min0(proposal.log_target - state.target.log_target);
  report.stage1_accepted = detail::accept_with(report.log_alpha1, rng);
  report.stage2_accepted = report.stage1_accepted;
  if (report.stage2_accepted) state.accept(std::move(proposal));
  adapt.update(u, std::exp(report.log_alpha1));
  return report;
}

/// Conventional delayed acceptance: adaptive random-walk proposal screened by the
/// frozen-W surrogate, then corrected against the exact target.
inline StepReport da_conventional_step(ChainState& state, AdaptState& adapt, const MomentModel& model, Rng& rng,
                                       DaAdaptSignal signal = DaAdaptSignal::Stage1) {
  StepReport report;
  const Vector u = standard_normal_vector(model.k(), rng);
  report.proposal = state.theta + adapt.scale * u;
  const CholeskyFactor& frozen = *state.target.weighting;

  report.log_alpha1 = detail::min0(log_surrogate_ratio(model, state.prior, report.proposal, state.theta, frozen));
  report.stage1_accepted = detail::accept_with(report.log_alpha1, rng);

  if (report.stage1_accepted) {
    TargetEval proposal = log_target(model, state.prior, report.proposal);
    report.singular = proposal.singular();
    double log_alpha2 = kNegInf;
    if (!proposal.singular()) {
      const double reverse_alpha1 =
          detail::min0(log_surrogate_ratio(model, state.prior, state.theta, report.proposal, *proposal.weighting));
      log_alpha2 = detail::min0(proposal.log_target - state.target.log_target + reverse_alpha1 - report.log_alpha1);
    }
    report.log_alpha2 = log_alpha2;
    report.stage2_accepted = detail::accept_with(log_alpha2, rng);
    if (report.stage2_accepted) state.accept(std::move(proposal));
  }

  const double signal_value =
      signal == DaAdaptSignal::Stage1 ? std::exp(report.log_alpha1) : (report.stage2_accepted ? 1.0 : 0.0);
  adapt.update(u, signal_value);
  return report;
}

namespace detail {

/// Shared body of the Exact (with_prior) and Approx modified DA steps.
inline StepReport modified_da_step(ChainState& state, const MomentModel& model, Rng& rng, bool with_prior) {
  StepReport report;
  const CholeskyFactor& frozen = *state.target.weighting;
  const auto forward = modified_proposal(model, state.prior, frozen, with_prior);
  if (!forward) {
    report.singular = true;
    report.proposal = state.theta;
    return report;
  }
  report.proposal = forward->draw(rng);
  const Vector& proposed = report.proposal;

  // Stage 1: both proposal directions under the frozen W. For Exact this is
  // identically zero before truncation; for Approx it reduces to the prior ratio.
  const double log_q_forward = forward->log_density(proposed);
  const double log_q_reverse_frozen = forward->log_density(state.theta);
  report.log_alpha1 = min0(log_surrogate_ratio(model, state.prior, proposed, state.theta, frozen) +
                           log_q_reverse_frozen - log_q_forward);
  report.stage1_accepted = accept_with(report.log_alpha1, rng);
  if (!report.stage1_accepted) return report;

  // Stage 2: W(theta') is available now, so evaluate the reverse move exactly.
  TargetEval proposal = log_target(model, state.prior, proposed);
  report.log_alpha2 = kNegInf;
  if (proposal.singular()) {
    report.singular = true;
    return report;
  }
  const auto reverse = modified_proposal(model, state.prior, *proposal.weighting, with_prior);
  if (!reverse) {
    report.singular = true;
    return report;
  }
  const double log_q_reverse = reverse->log_density(state.theta);
  const double log_q_forward_at_reverse = reverse->log_density(proposed);
  const double reverse_alpha1 =
      min0(log_surrogate_ratio(model, state.prior, state.theta, proposed, *proposal.weighting) +
           log_q_forward_at_reverse - log_q_reverse);

  const double log_alpha2 = min0((proposal.log_target + reverse_alpha1 + log_q_reverse) -
                                 (state.target.log_target + report.log_alpha1 + log_q_forward));
  report.log_alpha2 = log_alpha2;
  report.stage2_accepted = accept_with(log_alpha2, rng);
  if (report.stage2_accepted) state.accept(std::move(proposal));
  return report;
}

}  // namespace detail

/// Modified DA, Exact variant: proposal N(Omega Upsilon pivot, Omega), Omega = (Upsilon + Q)^{-1}.
inline StepReport mda_exact_step(ChainState& state, const MomentModel& model, Rng& rng) {
  return detail::modified_da_step(state, model, rng, true);
}

/// Modified DA, Approx variant: proposal N(pivot, Upsilon^{-1}).
inline StepReport mda_approx_step(ChainState& state, const MomentModel& model, Rng& rng) {
  return detail::modified_da_step(state, model, rng, false);
}

struct RunResult {
  Algorithm algorithm = Algorithm::MdaApprox;
  PriorSpec prior;
  Eigen::Index n = 0;
  Eigen::Index k = 0;
  std::uint64_t seed = 0;
  std::size_t total_draws = 0;
  std::size_t retained_draws = 0;
  /// retained_draws x k, oldest first.
  Matrix draws;
  Vector final_theta;
  /// Fraction of steps whose proposal passed stage 1.
  double accept_stage1 = 0.0;
  /// Fraction of steps whose proposal was finally accepted.
  double accept_stage2 = 0.0;
  std::size_t singular_steps = 0;
  /// Wall-clock seconds of the sampling loop only.
  double sampling_seconds = 0.0;
};

/// Fraction of singular steps above which run_chain gives up.
inline constexpr double kMaxSingularFraction = 0.999;

/// Runs one chain from the pivot. Each sweep is a theta move followed by a Gibbs
/// update of the prior hyperparameters (NIG families) and a refresh of the
/// cached target. Deterministic given config.seed.
inline RunResult run_chain(const MomentModel& model, const PriorSpec& prior_spec, const SamplerConfig& config) {
  config.validate();
  prior_spec.validate();
  Rng rng = make_rng(config.seed, Stream::Chain);
  ChainState state = ChainState::initial(model, prior_spec);
  if (state.target.singular()) throw SamplerFailure("run_chain: weighting matrix singular at the pivot");
  AdaptState adapt = AdaptState::initial(model.k(), config);

  RunResult result;
  result.algorithm = config.algorithm;
  result.prior = prior_spec;
  result.n = model.n();
  result.k = model.k();
  result.seed = config.seed;
  result.total_draws = config.total_draws;
  result.retained_draws = config.retained_draws;
  result.draws.resize(static_cast<Eigen::Index>(config.retained_draws), model.k());

  const std::size_t first_kept = config.total_draws - config.retained_draws;
  std::size_t stage1 = 0;
  std::size_t accepted = 0;
  std::size_t singular = 0;
  const bool has_hyper = prior_spec.family != PriorFamily::Normal;

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t t = 0; t < config.total_draws; ++t) {
    StepReport report;
    switch (config.algorithm) {
      case Algorithm::Ram: report = ram_step(state, adapt, model, rng); break;
      case Algorithm::DaConventional:
        report = da_conventional_step(state, adapt, model, rng, config.da_adapt_on);
        break;
      case Algorithm::MdaExact: report = mda_exact_step(state, model, rng); break;
      case Algorithm::MdaApprox: report = mda_approx_step(state, model, rng); break;
    }
    stage1 += report.stage1_accepted ? 1 : 0;
    accepted += report.stage2_accepted ? 1 : 0;
    singular += report.singular ? 1 : 0;

    if (has_hyper) {
      state.prior = state.prior.gibbs_update(state.theta, rng);
      refresh_prior(state.target, state.prior);
    }
    if (t >= first_kept) result.draws.row(static_cast<Eigen::Index>(t - first_kept)) = state.theta.transpose();
  }
  const auto stop = std::chrono::steady_clock::now();

  const auto total = static_cast<double>(config.total_draws);
  result.sampling_seconds = std::chrono::duration<double>(stop - start).count();
  result.accept_stage1 = static_cast<double>(stage1) / total;
  result.accept_stage2 = static_cast<double>(accepted) / total;
  result.singular_steps = singular;
  result.final_theta = state.theta;
  if (static_cast<double>(singular) > kMaxSingularFraction * total)
    throw SamplerFailure("run_chain: more than 99.9% of steps hit a singular factorization");
  return result;
}

}  // namespace qgmm
