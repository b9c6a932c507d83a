#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "qgmm/linalg.hpp"

namespace qgmm {

using Rng = std::mt19937_64;

/// Independent, reproducible streams derived from one 64-bit seed.
enum class Stream : std::uint32_t { Data = 0, Chain = 1 };

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

template <typename Engine>
Vector standard_normal_vector(Eigen::Index k, Engine& rng) {
  std::normal_distribution<double> normal;
  Vector u(k);
  for (Eigen::Index j = 0; j < k; ++j) u(j) = normal(rng);
  return u;
}

template <typename Engine>
double log_uniform(Engine& rng) {
  std::uniform_real_distribution<double> unif;
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  return std::log(u);
}

}  // namespace qgmm
