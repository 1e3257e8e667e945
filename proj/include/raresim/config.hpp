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

#ifndef RARESIM_CONFIG_HPP
#define RARESIM_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <raresim/estimators.hpp>
#include <raresim/gp.hpp>
#include <raresim/problem.hpp>

namespace raresim {

/// One experiment: a problem, an estimator with its parameters, and a replication plan.
struct ExperimentConfig {
  /// Built-in problem name: "cantilever" or "linear".
  std::string problem = "cantilever";
  /// Inline overrides of the problem definition.
  std::optional<std::vector<double>> means;
  std::optional<std::vector<double>> sds;
  std::optional<std::vector<double>> coefficients;
  std::optional<double> threshold;

  Method method = Method::kBayesianSubsetSimulation;
  std::size_t m = 1000;
  double p0 = 0.1;
  std::size_t n0 = 10;
  double eta_intermediate = 1e-6;
  double eta_final = 1e-7;
  std::size_t stage_budget = 100;
  std::size_t max_stages = 20;
  /// Unset: 1 for subsim, kBssDefaultSweeps for bss.
  std::optional<std::size_t> sweeps;
  std::optional<std::vector<double>> proposal_sds;
  Smoothness nu = Smoothness::kFiveHalves;
  std::size_t reml_starts = 7;

  std::size_t replications = 50;
  std::uint64_t master_seed = 20120101;
  /// Reference probability used for kappa and cov.
  std::optional<double> reference;
  std::string output_dir = "raresim-out";

  /// Throws InvalidInputError when the configuration is inconsistent.
  void validate() const;

  [[nodiscard]] ReliabilityProblem build_problem() const;
  [[nodiscard]] std::size_t effective_sweeps() const;
  [[nodiscard]] SubsimConfig subsim_config() const;
  [[nodiscard]] BssConfig bss_config() const;
};

/// Settings of the built-in profile "paper-cantilever": cantilever beam, Bayesian Subset
/// Simulation with m = 1000, p0 = 0.1, n0 = 10, eta = 1e-6 / 1e-7, 50 replications,
/// reference probability 3.85e-5.
ExperimentConfig paper_cantilever_profile();

/// Parses the `key = value` configuration format documented in the README.
/// A `profile` key, wherever it appears, is applied before the other keys.
/// Throws InvalidInputError on syntax errors, unknown keys and invalid values.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace raresim

#endif  // RARESIM_CONFIG_HPP
