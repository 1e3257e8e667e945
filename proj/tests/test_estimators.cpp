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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include <raresim/errors.hpp>
#include <raresim/estimators.hpp>

namespace raresim {
namespace {

ReliabilityProblem identity_problem(double u) {
  return ReliabilityProblem{"identity", InputDistribution({0.0}, {1.0}), [](Point x) { return x[0]; }, u};
}

PointMatrix column(const std::vector<double>& v) {
  PointMatrix x(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = v[i];
  }
  return x;
}

double min_pairwise_distance(const PointMatrix& x, const std::vector<std::size_t>& rows) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      const auto ia = static_cast<Eigen::Index>(rows[a]);
      const auto ib = static_cast<Eigen::Index>(rows[b]);
      best = std::min(best, (x.row(ia) - x.row(ib)).norm());
    }
  }
  return best;
}

// Unit-variance surrogate with mean equal to the first coordinate.
class ShiftedNormal final : public Surrogate {
 public:
  [[nodiscard]] Prediction predict(Point x) const override { return {x[0], 1.0}; }
  void observe(Point, double) override {}
  [[nodiscard]] bool is_duplicate(Point) const override { return false; }
  [[nodiscard]] std::size_t observation_count() const override { return 0; }
  [[nodiscard]] std::unique_ptr<Surrogate> clone() const override { return std::make_unique<ShiftedNormal>(); }
  [[nodiscard]] std::string to_json() const override { return "{}"; }
};

void expect_subset_invariants(const EstimateReport& r, double u_final) {
  ASSERT_FALSE(r.stages.empty());
  EXPECT_NEAR(r.estimate, r.product_of_factors(), 1e-12 * r.estimate);
  for (std::size_t t = 1; t < r.stages.size(); ++t) {
    EXPECT_LT(r.stages[t - 1].threshold, r.stages[t].threshold);
  }
  EXPECT_DOUBLE_EQ(r.stages.back().threshold, u_final);
}

TEST(CrudeMc, AllFailuresAndNormalTail) {
  Rng rng(1);
  const EstimateReport all = crude_mc(identity_problem(-100.0), 1000, rng);
  EXPECT_DOUBLE_EQ(all.estimate, 1.0);
  EXPECT_EQ(all.total_evaluations, 1000);

  const std::size_t m = 100000;
  const EstimateReport tail = crude_mc(identity_problem(1.6449), m, rng);
  const double se = std::sqrt(0.05 * 0.95 / static_cast<double>(m));
  EXPECT_NEAR(tail.estimate, 0.05, 4 * se);
  ASSERT_TRUE(tail.binomial_sd.has_value());
  EXPECT_NEAR(*tail.binomial_sd, std::sqrt(tail.estimate * (1 - tail.estimate) / static_cast<double>(m)), 1e-15);
  EXPECT_EQ(tail.total_evaluations, static_cast<std::int64_t>(m));
}

TEST(Maximin, SmallCases) {
  EXPECT_EQ(maximin_indices(column({3.0, 4.0}), 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(maximin_indices(column({0.0, 0.5, 1.0}), 3), (std::vector<std::size_t>{0, 2, 1}));
  EXPECT_THROW(maximin_indices(column({0.0, 1.0}), 3), InvalidInputError);
  EXPECT_THROW(maximin_indices(column({0.0, 1.0}), 1), InvalidInputError);
}

TEST(Maximin, BeatsRandomSubsets) {
  const auto p = cantilever_problem();
  Rng rng(31);
  const PointMatrix cloud = p.input.standardize(sample_input(p.input, 1000, rng));
  const double chosen = min_pairwise_distance(cloud, maximin_indices(cloud, 10));
  std::vector<std::size_t> all(1000);
  std::iota(all.begin(), all.end(), std::size_t{0});
  int beaten = 0;
  for (int k = 0; k < 100; ++k) {
    std::shuffle(all.begin(), all.end(), rng);
    const std::vector<std::size_t> subset(all.begin(), all.begin() + 10);
    beaten += chosen > min_pairwise_distance(cloud, subset) ? 1 : 0;
  }
  EXPECT_GE(beaten, 99);
}

TEST(SolveThreshold, FinalClauseAndIndicatorQuantile) {
  std::vector<Prediction> preds;
  for (int i = 0; i < 100; ++i) {
    preds.push_back({static_cast<double>(i), 0.0});
  }
  const std::vector<double> ones(100, 1.0);
  EXPECT_DOUBLE_EQ(solve_threshold(preds, ones, 50.0, 0.1), 50.0);
  const double u = solve_threshold(preds, ones, 1000.0, 0.1);
  // Ten means (90..99) strictly above u, the eleventh (89) not.
  EXPECT_GE(u, 89.0);
  EXPECT_LT(u, 90.0);
  EXPECT_DOUBLE_EQ(level_ratio(preds, ones, u), 0.1);
}

TEST(SolveThreshold, AgreesWithGridScan) {
  Rng rng(44);
  std::normal_distribution<double> z;
  std::vector<Prediction> preds;
  std::vector<double> prev;
  for (int i = 0; i < 200; ++i) {
    preds.push_back({z(rng), 0.05 + 0.5 * uniform01(rng)});
    prev.push_back(0.2 + 0.8 * uniform01(rng));
  }
  const double p0 = 0.1;
  const double u = solve_threshold(preds, prev, 50.0, p0);
  // Level ratio is nonincreasing in u: find the last grid point still at or above p0.
  const double lo = -10.0;
  const double hi = 10.0;
  const int n = 1000000;
  const double step = (hi - lo) / n;
  int a = 0;
  int b = n;
  while (b - a > 1) {
    const int mid = (a + b) / 2;
    (level_ratio(preds, prev, lo + mid * step) >= p0 ? a : b) = mid;
  }
  EXPECT_NEAR(u, lo + a * step, step + 1e-8);
  EXPECT_GE(level_ratio(preds, prev, u), p0);
}

TEST(BayesAlpha, Averages) {
  const ShiftedNormal model;
  const double u = 1.0;
  EXPECT_DOUBLE_EQ(compute_bayes_alpha(ExactSurrogate([](Point) { return 5.0; }), u, column({0.0, 1.0})), 1.0);
  EXPECT_DOUBLE_EQ(compute_bayes_alpha(ExactSurrogate([](Point) { return -5.0; }), u, column({0.0, 1.0})), 0.0);
  // Phi^-1(0.2) and Phi^-1(0.4)
  const PointMatrix half = column({u - 0.8416212335729143, u - 0.8416212335729143, u - 0.2533471031357997,
                                   u - 0.2533471031357997});
  EXPECT_NEAR(compute_bayes_alpha(model, u, half), 0.3, 1e-12);
}

TEST(ClassicSubsim, Invariants) {
  const auto p = identity_problem(3.5);
  SubsimConfig config;
  config.m = 1000;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(2, seed));
    const EstimateReport r = classic_subsim(p, config, rng);
    expect_subset_invariants(r, p.failure_threshold);
    for (std::size_t t = 0; t + 1 < r.stages.size(); ++t) {
      EXPECT_EQ(r.stages[t].factor, 0.1);
    }
    EXPECT_GE(r.stages.back().factor, 0.1);
    EXPECT_LE(r.stages.back().factor, 1.0);
    const auto later = static_cast<std::int64_t>(r.stages.size() - 1);
    EXPECT_EQ(r.total_evaluations, 1000 + later * 1000);
    EXPECT_EQ(r.nominal_evaluations.value(), 1000 + later * 900);
    std::int64_t charged = 0;
    for (const auto& s : r.stages) {
      charged += s.evaluations;
    }
    EXPECT_LE(charged, r.total_evaluations);
  }
}

TEST(ClassicSubsim, SingleStageIsCrudeMc) {
  const auto p = identity_problem(0.5);
  SubsimConfig config;
  PointMatrix initial;
  config.observer = [&](int stage, const ParticlePopulation& pop) {
    if (stage == 0) {
      initial = pop.points;
    }
  };
  Rng rng(6);
  const EstimateReport r = classic_subsim(p, config, rng);
  ASSERT_EQ(r.stages.size(), 1u);
  EXPECT_DOUBLE_EQ(r.estimate, (initial.col(0).array() > 0.5).cast<double>().mean());
  EXPECT_THROW((classic_subsim(p, SubsimConfig{5, 0.1, {}, 50, {}}, rng)), InvalidInputError);
}

TEST(BayesianSubsim, LinearToyInvariants) {
  const auto p = identity_problem(2.3263);
  BssConfig config;
  config.m = 500;
  config.n0 = 5;
  Rng rng(10);
  const EstimateReport r = bayesian_subsim(p, config, rng);
  expect_subset_invariants(r, p.failure_threshold);
  std::int64_t charged = static_cast<std::int64_t>(config.n0);
  for (const auto& s : r.stages) {
    charged += s.evaluations;
  }
  EXPECT_EQ(charged, r.total_evaluations);
  EXPECT_GT(r.estimate, 0.002);
  EXPECT_LT(r.estimate, 0.05);
}

TEST(BayesianSubsim, SingleStageIsSmoothedMc) {
  const auto p = identity_problem(0.5);
  BssConfig config;
  config.m = 400;
  config.n0 = 4;
  config.surrogate = [](const PointMatrix&, const Vector& y, const ReliabilityProblem& problem) {
    return std::make_unique<ExactSurrogate>(problem.performance, static_cast<std::size_t>(y.size()));
  };
  PointMatrix initial;
  config.observer = [&](int stage, const ParticlePopulation& pop) {
    if (stage == 0) {
      initial = pop.points;
    }
  };
  Rng rng(3);
  const EstimateReport r = bayesian_subsim(p, config, rng);
  ASSERT_EQ(r.stages.size(), 1u);
  EXPECT_DOUBLE_EQ(r.estimate, (initial.col(0).array() > 0.5).cast<double>().mean());
  EXPECT_EQ(r.total_evaluations, 4);
}

TEST(BssConfig, Validation) {
  BssConfig c;
  EXPECT_NO_THROW(c.validate(2));
  c.eta_final = 1e-5;
  EXPECT_THROW(c.validate(2), InvalidInputError);
  c = BssConfig{};
  c.n0 = 3;
  EXPECT_THROW(c.validate(2), InvalidInputError);
  c = BssConfig{};
  c.p0 = 1.0;
  EXPECT_THROW(c.validate(2), InvalidInputError);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::kMonteCarlo, Method::kSubsetSimulation, Method::kBayesianSubsetSimulation}) {
    EXPECT_EQ(method_from_string(to_string(m)), m);
  }
  EXPECT_THROW(method_from_string("nope"), InvalidInputError);
}

}  // namespace
}  // namespace raresim
