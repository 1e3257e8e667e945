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

#ifndef RARESIM_BENCH_HPP
#define RARESIM_BENCH_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <raresim/config.hpp>
#include <raresim/errors.hpp>
#include <raresim/estimators.hpp>

namespace raresim {

/// Replication statistics. `cov` is normalized by the reference probability,
/// `cov_self` by the mean estimate.
struct ReplicationStats {
  std::size_t replications = 0;
  double mean = 0.0;
  /// Sample standard deviation (divisor R - 1); absent when R = 1.
  std::optional<double> sd;
  std::optional<double> reference;
  std::optional<double> kappa;
  std::optional<double> cov;
  std::optional<double> cov_self;
};

/// Mean, sample sd, kappa = |mean - reference| / reference and cov = sd / reference.
/// Sums run over the sorted estimates, so the result does not depend on their order.
/// Throws InvalidInputError on an empty vector or a nonpositive reference.
ReplicationStats compute_stats(std::span<const double> estimates, std::optional<double> reference);

struct RunOutcome {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::optional<EstimateReport> report;
  std::string error;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunOutcome> runs;
  std::size_t failures = 0;
  std::optional<ReplicationStats> stats;

  [[nodiscard]] std::vector<double> estimates() const;
  /// Fraction of failed replications is at most 20%.
  [[nodiscard]] bool acceptable() const;
};

/// Raised by run_experiment when more than 20% of the replications failed. The artifacts are
/// written before it is thrown.
class ExperimentError : public Error {
 public:
  ExperimentError(const std::string& what, ExperimentResult result) : Error(what), result_(std::move(result)) {}
  [[nodiscard]] const ExperimentResult& result() const noexcept { return result_; }

 private:
  ExperimentResult result_;
};

enum class LogLevel { kOff, kInfo, kTrace };

/// Level from the RARESIM_LOG environment variable (off, info or trace; default off).
LogLevel log_level_from_env();

struct RunOptions {
  /// Worker threads; 0 means the number of hardware threads.
  std::size_t jobs = 0;
  LogLevel log = LogLevel::kOff;
  /// Write summary.json, runs.csv and stages.csv into config.output_dir.
  bool write_files = true;
};

/// Runs one estimator replication with the given seed.
EstimateReport run_replication(const ExperimentConfig& config, const ReliabilityProblem& problem, std::uint64_t seed,
                               const PopulationObserver& observer = {});

/// Runs config.replications replications with seeds derive_seed(master_seed, k), aggregates the
/// statistics of the successful ones and writes the artifacts. Failed replications are recorded
/// and excluded. Throws ExperimentError when more than 20% fail.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Summary document; contains no timing or host information, so identical inputs give identical bytes.
std::string summary_json(const ExperimentResult& result);
std::string runs_csv(const ExperimentResult& result);
std::string stages_csv(const ExperimentResult& result);

struct Table4Options {
  std::string output_dir = "raresim-table4";
  std::uint64_t master_seed = 20120101;
  std::size_t jobs = 0;
  std::size_t replications = 50;
  std::size_t mc_samples = 10000000;
  double reference = 3.85e-5;
  LogLevel log = LogLevel::kOff;
};

/// Crude Monte Carlo, Subset Simulation and Bayesian Subset Simulation on the cantilever case.
/// Writes one experiment directory per method plus table4.csv and table4.json. Returns the
/// three experiment results in that order.
std::vector<ExperimentResult> run_table4(const Table4Options& options);

}  // namespace raresim

#endif  // RARESIM_BENCH_HPP
