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

#ifndef RARESIM_EXCURSION_HPP
#define RARESIM_EXCURSION_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <raresim/errors.hpp>
#include <raresim/gp.hpp>
#include <raresim/problem.hpp>
#include <raresim/types.hpp>

namespace raresim {

/// Standard normal CDF.
double normal_cdf(double z);
/// log of the standard normal CDF, accurate far into the lower tail.
double log_normal_cdf(double z);

/// Posterior probability that the process exceeds `threshold`: Phi((mean - u) / sd),
/// or the indicator 1{mean > u} when sd = 0.
double excursion_prob(const Prediction& prediction, double threshold);
/// log of excursion_prob; -infinity where the probability is zero.
double log_excursion_prob(const Prediction& prediction, double threshold);
/// min(g, 1 - g) with g = excursion_prob.
double misclassification(const Prediction& prediction, double threshold);

/// What the sequential estimators need from a model of f: predictions, conditioning on a new
/// evaluation, and duplicate detection. Implementations own their state; `observe` mutates it.
class Surrogate {
 public:
  virtual ~Surrogate() = default;

  [[nodiscard]] virtual Prediction predict(Point x) const = 0;
  [[nodiscard]] virtual std::vector<Prediction> predict(const PointMatrix& points) const;

  /// Conditions on f(x) = y (and re-estimates hyperparameters where applicable).
  virtual void observe(Point x, double y) = 0;

  [[nodiscard]] virtual bool is_duplicate(Point x) const = 0;
  [[nodiscard]] virtual std::size_t observation_count() const = 0;
  [[nodiscard]] virtual std::unique_ptr<Surrogate> clone() const = 0;
  /// Snapshot of the model state for diagnostics.
  [[nodiscard]] virtual std::string to_json() const = 0;
};

/// Kriging surrogate that re-estimates its covariance parameters by REML after every
/// observation, warm-started at the previous optimum plus one fresh start.
class GpSurrogate final : public Surrogate {
 public:
  GpSurrogate(GpModel model, RemlConfig config, bool refit_on_observe = true);

  /// REML fit on an initial design.
  static GpSurrogate fit(const PointMatrix& designs, const Vector& observations, std::vector<double> input_scales,
                         const RemlConfig& config = {});

  [[nodiscard]] Prediction predict(Point x) const override { return model_.predict(x); }
  [[nodiscard]] std::vector<Prediction> predict(const PointMatrix& points) const override {
    return model_.predict(points);
  }
  void observe(Point x, double y) override;
  [[nodiscard]] bool is_duplicate(Point x) const override { return model_.is_duplicate(x); }
  [[nodiscard]] std::size_t observation_count() const override { return model_.size(); }
  [[nodiscard]] std::unique_ptr<Surrogate> clone() const override { return std::make_unique<GpSurrogate>(*this); }
  [[nodiscard]] std::string to_json() const override { return model_.to_json(); }

  [[nodiscard]] const GpModel& model() const noexcept { return model_; }

 private:
  GpModel model_;
  RemlConfig config_;
  bool refit_on_observe_;
  std::size_t refits_ = 0;
};

/// Zero-variance surrogate whose mean is a known deterministic function. Its excursion
/// probability is the indicator 1{f(x) > u}; observations are recorded but change nothing.
class ExactSurrogate final : public Surrogate {
 public:
  explicit ExactSurrogate(PerformanceFunction mean, std::size_t initial_count = 0)
      : mean_(std::move(mean)), count_(initial_count) {}

  [[nodiscard]] Prediction predict(Point x) const override { return {mean_(x), 0.0}; }
  void observe(Point, double) override { ++count_; }
  [[nodiscard]] bool is_duplicate(Point) const override { return false; }
  [[nodiscard]] std::size_t observation_count() const override { return count_; }
  [[nodiscard]] std::unique_ptr<Surrogate> clone() const override { return std::make_unique<ExactSurrogate>(*this); }
  [[nodiscard]] std::string to_json() const override;

 private:
  PerformanceFunction mean_;
  std::size_t count_;
};

/// Index of the candidate with the largest misclassification probability at `threshold`.
/// Ties go to the lowest index; candidates that duplicate a design point are skipped.
/// Throws InvalidInputError on an empty candidate set and NoSelectablePointError when every
/// candidate is a duplicate.
std::size_t select_next_point(const Surrogate& model, double threshold, const PointMatrix& candidates);

/// Same rule on precomputed misclassification values.
std::size_t select_max_misclassification(const Surrogate& model, const std::vector<double>& tau,
                                         const PointMatrix& candidates);

struct StageLearningResult {
  std::size_t evaluations = 0;
  /// Mean misclassification over the particles before each selection, plus the final value.
  std::vector<double> mean_tau_trace;
  std::vector<std::vector<double>> selected_points;
  std::vector<double> selected_values;
  /// Stopped because the mean misclassification reached eta (rather than the budget).
  bool reached_tolerance = false;

  [[nodiscard]] double final_mean_tau() const { return mean_tau_trace.empty() ? 0.0 : mean_tau_trace.back(); }
};

/// Raised when an evaluation or a model update fails inside run_stage_learning.
/// Carries the trace up to the failure and a snapshot of the partially updated model.
class StageLearningError : public Error {
 public:
  StageLearningError(const std::string& what, StageLearningResult partial, std::string model_snapshot)
      : Error(what), partial_(std::move(partial)), model_snapshot_(std::move(model_snapshot)) {}

  [[nodiscard]] const StageLearningResult& partial() const noexcept { return partial_; }
  [[nodiscard]] const std::string& model_snapshot() const noexcept { return model_snapshot_; }

 private:
  StageLearningResult partial_;
  std::string model_snapshot_;
};

/// Mean of min(g, 1 - g) over the rows of `particles`.
double mean_misclassification(const Surrogate& model, double threshold, const PointMatrix& particles);

/// Adds evaluations at max-misclassification particles until the mean misclassification over
/// `particles` is at most `eta` or `budget` evaluations were made. Every f call goes through
/// `evaluator`. Throws InvalidInputError unless eta > 0, and StageLearningError on failures.
StageLearningResult run_stage_learning(Surrogate& model, CountingEvaluator& evaluator, double threshold,
                                       const PointMatrix& particles, double eta, std::size_t budget);

}  // namespace raresim

#endif  // RARESIM_EXCURSION_HPP
