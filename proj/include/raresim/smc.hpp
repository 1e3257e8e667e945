// Copyright 2026 The raresim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RARESIM_SMC_HPP
#define RARESIM_SMC_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <raresim/random.hpp>
#include <raresim/types.hpp>

namespace raresim {

/// Weighted particle cloud. `cache` holds one scalar per particle that the estimator attaches
/// to each position (the excursion probability for the Bayesian estimator, f for Subset Simulation).
struct ParticlePopulation {
  PointMatrix points;
  Vector weights;
  Vector cache;
  int stage = 0;

  /// Equally weighted population; `cache` defaults to ones.
  static ParticlePopulation uniform(PointMatrix points, Vector cache = {}, int stage = 0);

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(points.rows()); }
  [[nodiscard]] std::size_t dims() const noexcept { return static_cast<std::size_t>(points.cols()); }

  /// Throws InvalidInputError unless m >= 2, sizes agree and the weights are finite,
  /// nonnegative and sum to 1 within 1e-12.
  void validate() const;
};

struct MoveConfig {
  std::vector<double> proposal_sds;
  /// Full fixed-scan passes over the coordinates of each particle.
  std::size_t sweeps = 1;

  void validate(std::size_t dims) const;
};

/// Floor applied to denominators of importance ratios.
inline constexpr double kRatioFloor = 1e-300;

struct WeightResult {
  Vector weights;
  /// (1/m) * sum of the raw ratios.
  double factor = 0.0;
};

/// Ratios r_i = g_num[i] / max(g_den[i], 1e-300) (0 where g_num[i] = 0), normalized to weights.
/// Throws InvalidInputError on size or range violations and DegeneratePopulationError when
/// every ratio is zero.
WeightResult compute_weights(std::span<const double> g_num, std::span<const double> g_den);

/// m draws with replacement, index i with probability weights[i]; output weights are uniform.
/// Consumes exactly m engine outputs.
ParticlePopulation multinomial_resample(const ParticlePopulation& population, Rng& rng);

struct TargetValue {
  double log_density = 0.0;
  /// Quantity cached alongside an accepted position.
  double aux = 0.0;
};

/// Target density of a move step. `evaluate` is called once per proposal; `from_cache`
/// rebuilds the log-density of a current particle from its cached value without new work.
struct MoveTarget {
  std::function<TargetValue(Point)> evaluate;
  std::function<double(Point, double)> from_cache;
};

/// Target built from a plain log-density. Current states are re-evaluated, so any cache is accepted.
MoveTarget log_density_target(std::function<double(Point)> log_density);

struct MoveStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
};

/// Fixed-scan Metropolis-within-Gibbs: for each particle and sweep, coordinates 0..d-1 in order
/// receive a Gaussian random-walk proposal, accepted with probability min(1, exp(delta log-density)).
/// A NaN log-density counts as -infinity. Each proposal draws one normal then one uniform.
/// Throws InvalidInputError when a current particle has a non-finite log-density.
ParticlePopulation mwg_move(const ParticlePopulation& population, const MoveTarget& target, const MoveConfig& config,
                            Rng& rng, MoveStats* stats = nullptr);

}  // namespace raresim

#endif  // RARESIM_SMC_HPP
