#include <gtest/gtest.h>

#include <boost/math/distributions/inverse_gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "qgmm/prior.hpp"
#include "qgmm/random.hpp"

using qgmm::Matrix;
using qgmm::PriorFamily;
using qgmm::PriorSpec;
using qgmm::PriorState;
using qgmm::Vector;

namespace {

PriorState hetero(std::initializer_list<double> tau) {
  Vector t(static_cast<Eigen::Index>(tau.size()));
  Eigen::Index j = 0;
  for (double v : tau) t(j++) = v;
  return PriorState({PriorFamily::NigHetero, 2.0, 1.0}, t);
}

/// Sup-norm between the empirical CDF of `draws` and the CDF of an unnormalized
/// density tabulated on a fine grid (trapezoid rule).
template <typename LogDensity>
double cdf_sup_distance(std::vector<double> draws, LogDensity log_density, double lo, double hi, int points) {
  std::sort(draws.begin(), draws.end());
  const double h = (hi - lo) / points;
  std::vector<double> grid(static_cast<std::size_t>(points) + 1), cdf(grid.size(), 0.0);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = lo + h * static_cast<double>(i);
    max_log = std::max(max_log, log_density(grid[i]));
  }
  for (std::size_t i = 1; i < grid.size(); ++i)
    cdf[i] = cdf[i - 1] + 0.5 * h * (std::exp(log_density(grid[i - 1]) - max_log) + std::exp(log_density(grid[i]) - max_log));
  for (auto& c : cdf) c /= cdf.back();
  double sup = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto below = std::upper_bound(draws.begin(), draws.end(), grid[i]) - draws.begin();
    sup = std::max(sup, std::abs(static_cast<double>(below) / static_cast<double>(draws.size()) - cdf[i]));
  }
  return sup;
}

}  // namespace

TEST(PriorSpec, RejectsNonPositiveHyperparameters) {
  EXPECT_THROW(PriorSpec({PriorFamily::NigHomo, 0.0, 1.0}).validate(), qgmm::InvalidArgument);
  EXPECT_THROW(PriorSpec({PriorFamily::NigHomo, 1.0, -1.0}).validate(), qgmm::InvalidArgument);
  EXPECT_THROW(PriorState({PriorFamily::NigHetero, 2.0, 1.0}, Vector::Constant(2, -1.0)), qgmm::InvalidArgument);
  EXPECT_THROW(PriorState({PriorFamily::NigHomo, 2.0, 1.0}, Vector::Ones(2)), qgmm::InvalidArgument);
  EXPECT_THROW(PriorState({PriorFamily::Normal, 2.0, 1.0}, Vector::Ones(1)), qgmm::InvalidArgument);
}

TEST(PriorState, InitialHyperparametersArePriorMean) {
  const auto homo = PriorState::initial({PriorFamily::NigHomo, 2.0, 1.0}, 4);
  ASSERT_EQ(homo.tau().size(), 1);
  EXPECT_DOUBLE_EQ(homo.tau()(0), 1.0);
  const auto het = PriorState::initial({PriorFamily::NigHetero, 3.0, 1.0}, 4);
  ASSERT_EQ(het.tau().size(), 4);
  EXPECT_DOUBLE_EQ(het.tau()(2), 0.5);
  EXPECT_DOUBLE_EQ(PriorState::initial({PriorFamily::NigHetero, 0.5, 1.0}, 2).tau()(0), 1.0);
  EXPECT_EQ(PriorState::initial({}, 3).tau().size(), 0);
}

TEST(PriorState, LogDensityExamples) {
  const auto normal = PriorState::initial({}, 2);
  EXPECT_DOUBLE_EQ(normal.log_density(Vector::Zero(2)), 0.0);
  EXPECT_DOUBLE_EQ(normal.log_density(Vector::Ones(2)), -1.0);

  const auto het = hetero({1.0, 4.0});
  const Vector theta = Vector::Constant(2, 2.0);
  EXPECT_NEAR(het.log_density(theta), -2.5 - 0.5 * std::log(4.0), 1e-14);
  EXPECT_NEAR(het.log_density(theta), oracle::dense_log_prior(theta, (Vector(2) << 1.0, 0.25).finished()), 1e-14);

  const PriorState homo({PriorFamily::NigHomo, 2.0, 1.0}, Vector::Constant(1, 2.0));
  EXPECT_NEAR(homo.log_density(Vector::Ones(3)), -0.75 - 1.5 * std::log(2.0), 1e-14);
}

TEST(PriorState, LogDensityDifferenceDependsOnlyOnQ) {
  std::mt19937_64 rng(1);
  const auto het = hetero({0.3, 2.0, 5.0});
  const Matrix q = het.precision(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector a = oracle::iid_normal(3, 1, rng).col(0) * 2.0;
    const Vector b = oracle::iid_normal(3, 1, rng).col(0) * 2.0;
    EXPECT_NEAR(het.log_density(a) - het.log_density(b), -0.5 * (a.dot(q * a) - b.dot(q * b)), 1e-12);
    EXPECT_TRUE(std::isfinite(het.log_density(a)));
  }
}

TEST(PriorState, PrecisionExamples) {
  EXPECT_TRUE(PriorState::initial({}, 3).precision(3).isIdentity());
  const PriorState homo({PriorFamily::NigHomo, 2.0, 1.0}, Vector::Constant(1, 2.0));
  EXPECT_TRUE(homo.precision(2).isApprox(0.5 * Matrix::Identity(2, 2)));
  const Matrix q = hetero({0.5, 2.0}).precision(2);
  EXPECT_DOUBLE_EQ(q(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(q(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(q(0, 1), 0.0);
}

TEST(Gibbs, NormalFamilyIsUnchanged) {
  qgmm::Rng rng(1);
  const auto s = PriorState::initial({}, 3);
  const auto t = s.gibbs_update(Vector::Ones(3), rng);
  EXPECT_EQ(t.tau().size(), 0);
  EXPECT_EQ(t.family(), PriorFamily::Normal);
}

TEST(Gibbs, NigHomoMomentCheck) {
  // nu1 = 2, nu2 = 1, k = 5, sum theta^2 = 4 -> InvGamma(4.5, 3), mean 3/3.5
  qgmm::Rng rng(42);
  const auto state = PriorState::initial({PriorFamily::NigHomo, 2.0, 1.0}, 5);
  Vector theta = Vector::Zero(5);
  theta(0) = 2.0;
  const int draws = 100000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += state.gibbs_update(theta, rng).tau()(0);
  const double a = 4.5, b = 3.0;
  const double mean = b / (a - 1.0);
  const double sd = std::sqrt(b * b / ((a - 1.0) * (a - 1.0) * (a - 2.0)));
  EXPECT_NEAR(sum / draws, mean, 3.0 * sd / std::sqrt(static_cast<double>(draws)));
}

TEST(Gibbs, NigHeteroQuantilesAtZero) {
  // theta_j = 0 -> tau_j ~ InvGamma(nu1 + 1/2, nu2)
  qgmm::Rng rng(7);
  const auto state = PriorState::initial({PriorFamily::NigHetero, 2.0, 1.0}, 2);
  std::vector<double> draws;
  for (int i = 0; i < 100000; ++i) draws.push_back(state.gibbs_update(Vector::Zero(2), rng).tau()(1));
  std::sort(draws.begin(), draws.end());
  boost::math::inverse_gamma_distribution<double> ig(2.5, 1.0);
  for (double p : {0.05, 0.25, 0.5, 0.75, 0.95}) {
    const double empirical = draws[static_cast<std::size_t>(p * static_cast<double>(draws.size()))];
    const double exact = boost::math::quantile(ig, p);
    // binomial standard error of the empirical CDF at the exact quantile
    const double cdf_at = boost::math::cdf(ig, empirical);
    EXPECT_NEAR(cdf_at, p, 4.0 * std::sqrt(p * (1 - p) / static_cast<double>(draws.size()))) << "p=" << p << " exact=" << exact;
  }
}

TEST(Gibbs, ConditionalsMatchGriddedPosterior) {
  // NIG-homo: tau | theta proportional to IG(nu1, nu2) prior times N(theta | 0, tau I).
  {
    qgmm::Rng rng(3);
    const auto state = PriorState::initial({PriorFamily::NigHomo, 2.0, 1.0}, 3);
    const Vector theta = (Vector(3) << 0.5, -1.0, 0.8).finished();
    std::vector<double> draws;
    for (int i = 0; i < 100000; ++i) draws.push_back(state.gibbs_update(theta, rng).tau()(0));
    const double ss = theta.squaredNorm();
    auto log_cond = [&](double tau) {
      if (tau <= 0.0) return -std::numeric_limits<double>::infinity();
      return (-2.0 - 1.0) * std::log(tau) - 1.0 / tau - 1.5 * std::log(tau) - 0.5 * ss / tau;
    };
    EXPECT_LT(cdf_sup_distance(draws, log_cond, 1e-6, 80.0, 400000), 0.01);
  }
  // NIG-hetero, one coordinate.
  {
    qgmm::Rng rng(4);
    const auto state = PriorState::initial({PriorFamily::NigHetero, 2.0, 1.0}, 2);
    const Vector theta = (Vector(2) << 1.3, 0.0).finished();
    std::vector<double> draws;
    for (int i = 0; i < 100000; ++i) draws.push_back(state.gibbs_update(theta, rng).tau()(0));
    auto log_cond = [&](double tau) {
      if (tau <= 0.0) return -std::numeric_limits<double>::infinity();
      return (-2.0 - 1.0) * std::log(tau) - 1.0 / tau - 0.5 * std::log(tau) - 0.5 * 1.69 / tau;
    };
    EXPECT_LT(cdf_sup_distance(draws, log_cond, 1e-6, 200.0, 1000000), 0.01);
  }
}
