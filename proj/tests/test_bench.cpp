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
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <raresim/bench.hpp>
#include <raresim/config.hpp>
#include <raresim/errors.hpp>

namespace raresim {
namespace {

ExperimentConfig small_subsim() {
  return parse_config(R"(
# tail of a scaled normal
problem = linear
coefficients = [2.0]
means = 0
sds = 1
threshold = 6.0
method = subsim
m = 200
replications = 6
seed = 99
reference = 0.0013498980316301
)");
}

std::vector<double> csv_estimates(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.at(2) == "ok") {
      out.push_back(std::stod(cells.at(3)));
    }
  }
  return out;
}

TEST(ComputeStats, HandArithmetic) {
  const std::vector<double> e{3.0, 5.0};
  const ReplicationStats s = compute_stats(e, 4.0);
  EXPECT_DOUBLE_EQ(s.mean, 4.0);
  EXPECT_DOUBLE_EQ(*s.kappa, 0.0);
  EXPECT_NEAR(*s.sd, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(*s.cov, std::sqrt(2.0) / 4.0, 1e-15);
  EXPECT_NEAR(*s.cov_self, std::sqrt(2.0) / 4.0, 1e-15);

  const std::vector<double> exact{2.0, 2.0, 2.0};
  const ReplicationStats z = compute_stats(exact, 2.0);
  EXPECT_DOUBLE_EQ(*z.kappa, 0.0);
  EXPECT_DOUBLE_EQ(*z.cov, 0.0);
}

TEST(ComputeStats, TableFourSubsetSimulationRow) {
  // Two estimates with mean 3.9078e-5 and sample sd 2.470e-5.
  const double half = 2.470e-5 / std::sqrt(2.0);
  const std::vector<double> e{3.9078e-5 - half, 3.9078e-5 + half};
  const ReplicationStats s = compute_stats(e, 3.85e-5);
  EXPECT_NEAR(*s.kappa, 0.015, 0.0005);
  EXPECT_NEAR(*s.cov, 0.642, 0.0005);
}

TEST(ComputeStats, SingleRunAndErrors) {
  const std::vector<double> one{1e-5};
  const ReplicationStats s = compute_stats(one, 1e-5);
  EXPECT_FALSE(s.sd.has_value());
  EXPECT_FALSE(s.cov.has_value());
  EXPECT_THROW(compute_stats(std::vector<double>{}, 1.0), InvalidInputError);
  EXPECT_THROW(compute_stats(one, 0.0), InvalidInputError);
}

TEST(ComputeStats, PermutationInvariant) {
  Rng rng(8);
  std::vector<double> e(37);
  for (double& v : e) {
    v = std::exp(10 * uniform01(rng)) * 1e-7;
  }
  const ReplicationStats a = compute_stats(e, 1e-5);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(e.begin(), e.end(), rng);
    const ReplicationStats b = compute_stats(e, 1e-5);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(*a.sd, *b.sd);
  }
}

TEST(Config, ParsesKeysListsAndComments) {
  const ExperimentConfig c = small_subsim();
  EXPECT_EQ(c.problem, "linear");
  EXPECT_EQ(c.method, Method::kSubsetSimulation);
  EXPECT_EQ(c.coefficients.value(), std::vector<double>{2.0});
  EXPECT_EQ(c.m, 200u);
  EXPECT_EQ(c.master_seed, 99u);
  EXPECT_EQ(c.effective_sweeps(), 1u);
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(parse_config("colour = blue"), InvalidInputError);
  EXPECT_THROW(parse_config("m = many"), InvalidInputError);
  EXPECT_THROW(parse_config("just words"), InvalidInputError);
  EXPECT_THROW(parse_config("profile = other"), InvalidInputError);
}

TEST(Config, ProfileAppliesFirst) {
  const ExperimentConfig c = parse_config("replications = 3\nprofile = paper-cantilever\n");
  EXPECT_EQ(c.replications, 3u);
  EXPECT_EQ(c.problem, "cantilever");
  EXPECT_EQ(c.method, Method::kBayesianSubsetSimulation);
  EXPECT_DOUBLE_EQ(c.reference.value(), 3.85e-5);
  EXPECT_EQ(c.m, 1000u);
  EXPECT_EQ(c.n0, 10u);
  EXPECT_DOUBLE_EQ(c.eta_intermediate, 1e-6);
  EXPECT_DOUBLE_EQ(c.eta_final, 1e-7);
  EXPECT_EQ(c.effective_sweeps(), kBssDefaultSweeps);
  const auto p = c.build_problem();
  EXPECT_DOUBLE_EQ(p.failure_threshold, 17.8);
  EXPECT_EQ(p.input.sds(), (std::vector<double>{0.0002, 37.5}));
}

TEST(Experiment, DeterministicAcrossWorkerCounts) {
  const ExperimentConfig c = small_subsim();
  const ExperimentResult a = run_experiment(c, RunOptions{1, LogLevel::kOff, false});
  const ExperimentResult b = run_experiment(c, RunOptions{3, LogLevel::kOff, false});
  EXPECT_EQ(summary_json(a), summary_json(b));
  EXPECT_EQ(runs_csv(a), runs_csv(b));
  EXPECT_EQ(stages_csv(a), stages_csv(b));
  EXPECT_TRUE(a.acceptable());
  EXPECT_EQ(a.runs.size(), 6u);
}

TEST(Experiment, CsvReproducesSummaryStatistics) {
  const ExperimentResult r = run_experiment(small_subsim(), RunOptions{1, LogLevel::kOff, false});
  const auto doc = nlohmann::json::parse(summary_json(r));
  const ReplicationStats s = compute_stats(csv_estimates(runs_csv(r)), 0.0013498980316301);
  EXPECT_NEAR(doc["estimate"]["kappa"].get<double>(), *s.kappa, 1e-12);
  EXPECT_NEAR(doc["estimate"]["cov"].get<double>(), *s.cov, 1e-12);
}

TEST(Experiment, SeedsAreDerivedFromMaster) {
  const ExperimentResult r = run_experiment(small_subsim(), RunOptions{1, LogLevel::kOff, false});
  for (const auto& run : r.runs) {
    EXPECT_EQ(run.seed, derive_seed(99, run.index));
  }
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Experiment, TooManyFailuresThrow) {
  ExperimentConfig c = small_subsim();
  c.max_stages = 1;
  c.replications = 3;
  EXPECT_THROW(run_experiment(c, RunOptions{1, LogLevel::kOff, false}), ExperimentError);
}

}  // namespace
}  // namespace raresim
