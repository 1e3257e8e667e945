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

#include <raresim/smc.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include <raresim/errors.hpp>

namespace raresim {

ParticlePopulation ParticlePopulation::uniform(PointMatrix points, Vector cache, int stage) {
  ParticlePopulation pop;
  const auto m = points.rows();
  pop.points = std::move(points);
  pop.weights = Vector::Constant(m, m > 0 ? 1.0 / static_cast<double>(m) : 0.0);
  pop.cache = cache.size() == 0 ? Vector::Ones(m) : std::move(cache);
  pop.stage = stage;
  return pop;
}

void ParticlePopulation::validate() const {
  if (points.rows() < 2) {
    throw InvalidInputError("ParticlePopulation: at least two particles are required");
  }
  if (weights.size() != points.rows() || cache.size() != points.rows()) {
    throw InvalidInputError("ParticlePopulation: weights and cache must have one entry per particle");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights(i)) || weights(i) < 0.0) {
      throw InvalidInputError("ParticlePopulation: weights must be finite and nonnegative");
    }
    sum += weights(i);
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvalidInputError("ParticlePopulation: weights must sum to one");
  }
}

void MoveConfig::validate(std::size_t dims) const {
  if (proposal_sds.size() != dims) {
    throw InvalidInputError("MoveConfig: one proposal sd per input dimension is required");
  }
  for (double s : proposal_sds) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidInputError("MoveConfig: proposal sds must be finite and positive");
    }
  }
  if (sweeps == 0) {
    throw InvalidInputError("MoveConfig: at least one sweep is required");
  }
}

WeightResult compute_weights(std::span<const double> g_num, std::span<const double> g_den) {
  if (g_num.size() != g_den.size() || g_num.empty()) {
    throw InvalidInputError("compute_weights: inputs must be non-empty and of equal length");
  }
  const auto m = static_cast<Eigen::Index>(g_num.size());
  WeightResult out;
  out.weights.resize(m);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double num = g_num[static_cast<std::size_t>(i)];
    const double den = g_den[static_cast<std::size_t>(i)];
    if (!(num >= 0.0) || !std::isfinite(num) || !(den >= 0.0) || !(den <= 1.0)) {
      throw InvalidInputError("compute_weights: probabilities must lie in [0, 1]");
    }
    const double r = num == 0.0 ? 0.0 : num / std::max(den, kRatioFloor);
    out.weights(i) = r;
    sum += r;
  }
  if (!(sum > 0.0)) {
    throw DegeneratePopulationError("compute_weights: every importance ratio is zero");
  }
  if (!std::isfinite(sum)) {
    throw DegeneratePopulationError("compute_weights: importance ratios overflow");
  }
  out.factor = sum / static_cast<double>(m);
  out.weights /= sum;
  return out;
}

ParticlePopulation multinomial_resample(const ParticlePopulation& population, Rng& rng) {
  population.validate();
  const auto m = population.points.rows();
  std::vector<double> cumulative(static_cast<std::size_t>(m));
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    total += population.weights(i);
    cumulative[static_cast<std::size_t>(i)] = total;
  }
  ParticlePopulation out;
  out.points.resize(m, population.points.cols());
  out.cache.resize(m);
  out.weights = Vector::Constant(m, 1.0 / static_cast<double>(m));
  out.stage = population.stage;
  for (Eigen::Index k = 0; k < m; ++k) {
    const double u = uniform01(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    auto index = static_cast<Eigen::Index>(std::distance(cumulative.begin(), it));
    index = std::min(index, m - 1);
    // Zero-weight particles own empty intervals and are never chosen by upper_bound,
    // except at the clamp above; step back to the last positive weight.
    while (index > 0 && population.weights(index) == 0.0) {
      --index;
    }
    out.points.row(k) = population.points.row(index);
    out.cache(k) = population.cache(index);
  }
  return out;
}

MoveTarget log_density_target(std::function<double(Point)> log_density) {
  MoveTarget target;
  target.evaluate = [log_density](Point x) {
    const double v = log_density(x);
    return TargetValue{v, v};
  };
  target.from_cache = [log_density](Point x, double) { return log_density(x); };
  return target;
}

ParticlePopulation mwg_move(const ParticlePopulation& population, const MoveTarget& target, const MoveConfig& config,
                            Rng& rng, MoveStats* stats) {
  const auto m = population.points.rows();
  const auto d = population.points.cols();
  config.validate(static_cast<std::size_t>(d));
  if (population.cache.size() != m) {
    throw InvalidInputError("mwg_move: one cached value per particle is required");
  }
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  ParticlePopulation out = population;
  std::normal_distribution<double> normal;
  std::vector<double> proposal(static_cast<std::size_t>(d));
  MoveStats local;
  for (Eigen::Index i = 0; i < m; ++i) {
    double* x = out.points.row(i).data();
    double aux = out.cache(i);
    double current = target.from_cache(Point(x, static_cast<std::size_t>(d)), aux);
    if (std::isnan(current) || current == std::numeric_limits<double>::infinity() || current == kNegInf) {
      throw InvalidInputError("mwg_move: target log-density is not finite at a current particle");
    }
    for (std::size_t sweep = 0; sweep < config.sweeps; ++sweep) {
      for (Eigen::Index j = 0; j < d; ++j) {
        std::copy(x, x + d, proposal.begin());
        proposal[static_cast<std::size_t>(j)] += config.proposal_sds[static_cast<std::size_t>(j)] * normal(rng);
        TargetValue value = target.evaluate(proposal);
        if (std::isnan(value.log_density)) {
          value.log_density = kNegInf;
        }
        const double u = uniform01(rng);
        ++local.proposals;
        if (value.log_density != kNegInf && std::log(u) < value.log_density - current) {
          std::copy(proposal.begin(), proposal.end(), x);
          current = value.log_density;
          aux = value.aux;
          ++local.accepted;
        }
      }
    }
    out.cache(i) = aux;
  }
  if (stats != nullptr) {
    stats->proposals += local.proposals;
    stats->accepted += local.accepted;
  }
  return out;
}

}  // namespace raresim
