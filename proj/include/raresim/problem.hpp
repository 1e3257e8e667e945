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

#ifndef RARESIM_PROBLEM_HPP
#define RARESIM_PROBLEM_HPP

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <raresim/random.hpp>
#include <raresim/types.hpp>

namespace raresim {

/// Product of independent normal marginals.
class InputDistribution {
 public:
  /// Throws InvalidInputError unless sizes agree, d >= 1, means are finite and sds are finite and > 0.
  InputDistribution(std::vector<double> means, std::vector<double> sds);

  [[nodiscard]] std::size_t dims() const noexcept { return means_.size(); }
  [[nodiscard]] const std::vector<double>& means() const noexcept { return means_; }
  [[nodiscard]] const std::vector<double>& sds() const noexcept { return sds_; }

  /// Log of the joint density at `x`.
  [[nodiscard]] double logpdf(Point x) const;

  /// Coordinates centered on the means and divided by the sds.
  [[nodiscard]] std::vector<double> standardize(Point x) const;
  [[nodiscard]] PointMatrix standardize(const PointMatrix& points) const;

 private:
  std::vector<double> means_;
  std::vector<double> sds_;
  double log_normalizer_;
};

using PerformanceFunction = std::function<double(Point)>;

/// Failure event {f(x) > threshold} under an input distribution.
struct ReliabilityProblem {
  std::string name;
  InputDistribution input;
  PerformanceFunction performance;
  double failure_threshold;
};

/// Deflection margin of a uniformly loaded cantilever beam.
/// f(x1, x2) = 18.46154 - 7.476923e10 * x1 / x2^3.
double cantilever_performance(Point x);

/// The built-in "cantilever" case: x1 ~ N(0.001, 0.0002), x2 ~ N(250, 37.5), threshold 17.8.
ReliabilityProblem cantilever_problem();

/// f(x) = sum_i coefficients[i] * x[i].
ReliabilityProblem linear_problem(std::vector<double> coefficients, InputDistribution input, double threshold);

/// Returns f(x). Throws InvalidInputError on a dimension mismatch or a non-finite coordinate,
/// and EvaluationError when f(x) is not finite.
double eval_performance(const ReliabilityProblem& problem, Point x);

/// `n` i.i.d. rows from `dist`. Throws InvalidInputError when n == 0.
PointMatrix sample_input(const InputDistribution& dist, std::size_t n, Rng& rng);

/// Throws InvalidInputError on a dimension mismatch or a non-finite coordinate.
double input_logpdf(const InputDistribution& dist, Point x);

/// Performance function wrapped with a call counter. Every estimator routes its
/// f calls through one of these; `count()` is the evaluation total it reports.
class CountingEvaluator {
 public:
  explicit CountingEvaluator(const ReliabilityProblem& problem) : problem_(&problem) {}

  double operator()(Point x) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return eval_performance(*problem_, x);
  }

  [[nodiscard]] std::int64_t count() const noexcept { return calls_.load(std::memory_order_relaxed); }
  [[nodiscard]] const ReliabilityProblem& problem() const noexcept { return *problem_; }

 private:
  const ReliabilityProblem* problem_;
  std::atomic<std::int64_t> calls_{0};
};

}  // namespace raresim

#endif  // RARESIM_PROBLEM_HPP
