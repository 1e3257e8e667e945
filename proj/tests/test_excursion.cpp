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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <raresim/errors.hpp>
#include <raresim/excursion.hpp>
#include <raresim/problem.hpp>

namespace raresim {
namespace {

PointMatrix column(const std::vector<double>& v) {
  PointMatrix x(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = v[i];
  }
  return x;
}

ReliabilityProblem sine_problem() {
  return ReliabilityProblem{"sine", InputDistribution({0.0}, {1.0}),
                            [](Point x) { return std::sin(2.0 * x[0]) + 0.5 * x[0]; }, 0.8};
}

TEST(ExcursionProb, NormalCdfValues) {
  EXPECT_NEAR(normal_cdf(1.6449), 0.95, 1e-4);
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(excursion_prob({1.6449 * 2.0 + 3.0, 4.0}, 3.0), 0.95, 1e-4);
  EXPECT_DOUBLE_EQ(excursion_prob({3.0, 0.25}, 3.0), 0.5);
  EXPECT_DOUBLE_EQ(excursion_prob({3.1, 0.0}, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(excursion_prob({2.9, 0.0}, 3.0), 0.0);
}

TEST(ExcursionProb, LogTail) {
  for (double z : {-1.0, -5.0, -20.0, -29.0}) {
    EXPECT_NEAR(log_normal_cdf(z), std::log(normal_cdf(z)), 1e-9 * std::abs(std::log(normal_cdf(z))));
  }
  // Mills ratio: Phi(z) ~ phi(z) / |z| (1 - 1/z^2)
  const double z = -40.0;
  const double approx = -0.5 * z * z - std::log(-z) - 0.5 * std::log(2 * M_PI) + std::log1p(-1 / (z * z));
  EXPECT_NEAR(log_normal_cdf(z), approx, 1e-4);
  EXPECT_EQ(log_excursion_prob({0.0, 0.0}, 1.0), -INFINITY);
}

TEST(Misclassification, MinOfBothSides) {
  EXPECT_DOUBLE_EQ(misclassification({1.0, 1.0}, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(misclassification({2.0, 0.0}, 1.0), 0.0);
  EXPECT_NEAR(misclassification({1.6449, 1.0}, 0.0), 0.05, 1e-4);
}

TEST(Selection, ArgmaxWithTies) {
  const ExactSurrogate model([](Point x) { return x[0]; });
  const PointMatrix three = column({0.0, 1.0, 2.0});
  EXPECT_EQ(select_max_misclassification(model, {0.01, 0.49, 0.3}, three), 1u);
  EXPECT_EQ(select_max_misclassification(model, {0.4, 0.4}, column({0.0, 1.0})), 0u);
  EXPECT_EQ(select_max_misclassification(model, {0.2}, column({0.0})), 0u);
  EXPECT_THROW(select_max_misclassification(model, {}, PointMatrix(0, 1)), InvalidInputError);
}

TEST(Selection, SkipsDesignDuplicates) {
  const auto p = sine_problem();
  const PointMatrix designs = column({-2.0, -1.0, 0.0, 1.0, 2.0});
  Vector y(5);
  for (Eigen::Index i = 0; i < 5; ++i) {
    y(i) = eval_performance(p, row_view(designs, i));
  }
  const GpSurrogate model = GpSurrogate::fit(designs, y, {1.0});
  const PointMatrix candidates = column({1.0, 0.5});
  EXPECT_EQ(select_max_misclassification(model, {0.5, 0.1}, candidates), 1u);
  EXPECT_THROW(select_max_misclassification(model, {0.5}, column({1.0})), NoSelectablePointError);
}

TEST(StageLearning, StopsImmediatelyOrOnBudget) {
  const auto p = sine_problem();
  const PointMatrix designs = column({-2.0, -1.0, 0.0, 1.0, 2.0});
  Vector y(5);
  for (Eigen::Index i = 0; i < 5; ++i) {
    y(i) = eval_performance(p, row_view(designs, i));
  }
  GpSurrogate model = GpSurrogate::fit(designs, y, {1.0});
  Rng rng(4);
  const PointMatrix particles = sample_input(p.input, 300, rng);
  CountingEvaluator f(p);

  const auto relaxed = run_stage_learning(model, f, p.failure_threshold, particles, 0.5, 100);
  EXPECT_EQ(relaxed.evaluations, 0u);
  EXPECT_TRUE(relaxed.reached_tolerance);
  EXPECT_EQ(model.observation_count(), 5u);

  const auto capped = run_stage_learning(model, f, p.failure_threshold, particles, 1e-12, 0);
  EXPECT_EQ(capped.evaluations, 0u);
  EXPECT_EQ(f.count(), 0);
  EXPECT_THROW(run_stage_learning(model, f, p.failure_threshold, particles, 0.0, 10), InvalidInputError);
}

TEST(StageLearning, ReducesMisclassificationAndCountsCalls) {
  const auto p = sine_problem();
  const PointMatrix designs = column({-2.0, -0.7, 0.6, 2.0});
  Vector y(4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    y(i) = eval_performance(p, row_view(designs, i));
  }
  GpSurrogate model = GpSurrogate::fit(designs, y, {1.0});
  Rng rng(8);
  const PointMatrix particles = sample_input(p.input, 500, rng);
  CountingEvaluator f(p);
  const double before = mean_misclassification(model, p.failure_threshold, particles);
  const auto result = run_stage_learning(model, f, p.failure_threshold, particles, 1e-6, 40);
  EXPECT_GT(result.evaluations, 0u);
  EXPECT_EQ(static_cast<std::int64_t>(result.evaluations), f.count());
  EXPECT_EQ(model.observation_count(), 4u + result.evaluations);
  EXPECT_EQ(result.mean_tau_trace.size(), result.evaluations + 1);
  EXPECT_DOUBLE_EQ(result.mean_tau_trace.front(), before);
  EXPECT_TRUE(result.reached_tolerance);
  EXPECT_LE(result.final_mean_tau(), 1e-6);
  for (std::size_t k = 0; k < result.selected_points.size(); ++k) {
    EXPECT_DOUBLE_EQ(result.selected_values[k], eval_performance(p, result.selected_points[k]));
  }
}

TEST(ExactSurrogate, IndicatorExcursion) {
  ExactSurrogate model([](Point x) { return 2.0 * x[0]; });
  const Prediction p = model.predict(std::vector<double>{1.5});
  EXPECT_DOUBLE_EQ(p.mean, 3.0);
  EXPECT_DOUBLE_EQ(p.variance, 0.0);
  EXPECT_DOUBLE_EQ(mean_misclassification(model, 1.0, column({0.0, 1.0, 2.0})), 0.0);
  model.observe(std::vector<double>{0.0}, 0.0);
  EXPECT_EQ(model.observation_count(), 1u);
}

}  // namespace
}  // namespace raresim
