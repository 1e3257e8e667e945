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

#ifndef RARESIM_ESTIMATORS_HPP
#define RARESIM_ESTIMATORS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <raresim/errors.hpp>
#include <raresim/excursion.hpp>
#include <raresim/gp.hpp>
#include <raresim/problem.hpp>
#include <raresim/random.hpp>
#include <raresim/smc.hpp>

namespace raresim {

enum class Method { kMonteCarlo, kSubsetSimulation, kBayesianSubsetSimulation };

/// "mc", "subsim" or "bss".
std::string to_string(Method method);
Method method_from_string(const std::string& text);

struct StageRecord {
  int index = 0;
  double threshold = 0.0;
  /// (1/m) sum of g_t / g_{t-1} over the particles of the previous stage.
  double factor = 0.0;
  /// f calls charged to this stage.
  std::int64_t evaluations = 0;
  /// Subset Simulation only: the per-stage cost under the nominal accounting
  /// (m for the first stage, (1 - p0) m per sweep afterwards).
  std::optional<std::int64_t> nominal_evaluations;
  /// Mean misclassification over the particles at the final threshold and model.
  double mean_misclassification = 0.0;
  /// Bayesian Subset Simulation only: learning trace of the stage.
  std::vector<double> tau_trace;
  std::vector<std::vector<double>> selected_points;
  bool reached_tolerance = true;
};

struct EstimateReport {
  Method method = Method::kMonteCarlo;
  std::uint64_t seed = 0;
  double estimate = 0.0;
  std::vector<StageRecord> stages;
  /// Number of performance-function calls made by the run.
  std::int64_t total_evaluations = 0;
  /// Subset Simulation only: m + (T - 1)(1 - p0) m * sweeps.
  std::optional<std::int64_t> nominal_evaluations;
  std::size_t sample_size = 0;
  /// Bayesian Subset Simulation only: size of the initial design.
  std::size_t initial_design_size = 0;
  /// Crude Monte Carlo only: sqrt(a (1 - a) / m).
  std::optional<double> binomial_sd;
  /// Metropolis-within-Gibbs acceptance rate over the run (NaN when no move happened).
  double acceptance_rate = 0.0;

  /// Product of the stage factors.
  [[nodiscard]] double product_of_factors() const;
};

/// Thrown when the final threshold is not reached within the stage limit.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, EstimateReport partial)
      : Error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const EstimateReport& partial() const noexcept { return partial_; }

 private:
  EstimateReport partial_;
};

/// Fraction of m i.i.d. input draws with f > u. Draws are generated in blocks of 10^5 rows.
EstimateReport crude_mc(const ReliabilityProblem& problem, std::size_t m, Rng& rng);

/// Greedy maximin selection: starts from the pair at maximal distance, then repeatedly adds the
/// candidate farthest from the chosen set. Ties go to the lowest index. Distances are Euclidean
/// in the coordinates given. Throws InvalidInputError unless rows >= n0 >= 2.
std::vector<std::size_t> maximin_indices(const PointMatrix& candidates, std::size_t n0);
PointMatrix maximin_doe(const PointMatrix& candidates, std::size_t n0);

/// Left-hand side (1/m) sum_i g(pred_i, u) / max(prev_g_i, 1e-300) of the level equation.
double level_ratio(std::span<const Prediction> predictions, std::span<const double> prev_g, double threshold);

/// Threshold u at which level_ratio equals p0, capped at u_final. Returns u_final when
/// level_ratio(u_final) >= p0. Otherwise bisects between a lower bracket where every g is 1 and
/// u_final down to 1e-9 * scale, scale = max(1, |u_final|, max|mean|, max sd), and returns the
/// largest bracket value whose level ratio is still >= p0.
/// Throws InvalidInputError on malformed inputs and DegenerateModelError when the lower
/// bracket does not reach p0.
double solve_threshold(std::span<const Prediction> predictions, std::span<const double> prev_g, double u_final,
                       double p0);
double solve_threshold(const PointMatrix& particles, const Surrogate& model, double u_final, double p0,
                       std::span<const double> prev_g);

/// Plain Monte Carlo average of the excursion probability over `sample`.
double compute_bayes_alpha(const Surrogate& model, double threshold, const PointMatrix& sample);

/// Called with the stage index and the population once it targets that stage's density
/// (stage 0 is the initial sample).
using PopulationObserver = std::function<void(int stage, const ParticlePopulation& population)>;

struct SubsimConfig {
  std::size_t m = 1000;
  double p0 = 0.1;
  /// Defaults to the input standard deviations when empty.
  MoveConfig move;
  std::size_t max_stages = 50;
  PopulationObserver observer;
};

/// Subset Simulation with adaptive levels. Each intermediate level keeps the round(p0 m) particles
/// of highest f (index order among ties) and sets the threshold with solve_threshold on the
/// indicator; survivors are resampled to m and moved with the indicator target, one f call per
/// proposal. Throws InvalidInputError unless m >= 10 and 0 < p0 < 1, and NonConvergenceError
/// after max_stages.
EstimateReport classic_subsim(const ReliabilityProblem& problem, const SubsimConfig& config, Rng& rng);

/// Builds the initial surrogate from the initial design.
using SurrogateFactory =
    std::function<std::unique_ptr<Surrogate>(const PointMatrix& designs, const Vector& observations,
                                             const ReliabilityProblem& problem)>;

/// Kriging with REML re-estimation after every evaluation, inputs scaled by the input sds.
SurrogateFactory gp_surrogate_factory(RemlConfig config = {});

/// Default Metropolis-within-Gibbs sweeps per Bayesian Subset Simulation move.
inline constexpr std::size_t kBssDefaultSweeps = 20;

struct BssConfig {
  std::size_t m = 1000;
  double p0 = 0.1;
  std::size_t n0 = 10;
  double eta_intermediate = 1e-6;
  double eta_final = 1e-7;
  std::size_t stage_budget = 100;
  std::size_t max_stages = 20;
  /// Defaults to the input standard deviations when empty.
  MoveConfig move{{}, kBssDefaultSweeps};
  RemlConfig reml;
  /// Defaults to gp_surrogate_factory(reml).
  SurrogateFactory surrogate;
  PopulationObserver observer;

  /// Throws InvalidInputError unless 0 < p0 < 1, 0 < eta_final <= eta_intermediate,
  /// n0 >= d + 2, m >= n0 and max_stages >= 1.
  void validate(std::size_t dims) const;
};

/// Bayesian Subset Simulation.
///
/// Stage 0 draws m particles from the input distribution, evaluates f on a maximin subset of
/// size n0 (standardized coordinates) and fits the surrogate. Each later stage solves the level
/// equation, learns the excursion set at that level until the mean misclassification over the
/// particles drops below eta, re-solves the level with the updated model, records the stage
/// factor (1/m) sum g_t / g_{t-1}, then resamples and moves the particles towards p_X g_t
/// (no f calls). The run ends at the stage whose threshold is the failure threshold; the
/// estimate is the product of the stage factors.
EstimateReport bayesian_subsim(const ReliabilityProblem& problem, const BssConfig& config, Rng& rng);

}  // namespace raresim

#endif  // RARESIM_ESTIMATORS_HPP
