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

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <raresim/bench.hpp>
#include <raresim/config.hpp>

namespace {

void print_stats(const raresim::ExperimentResult& result) {
  std::cout << raresim::to_string(result.config.method) << ": " << (result.runs.size() - result.failures) << "/"
            << result.runs.size() << " runs";
  if (result.stats) {
    const auto& s = *result.stats;
    std::cout << ", mean estimate " << s.mean;
    if (s.sd) {
      std::cout << ", sd " << *s.sd;
    }
    if (s.kappa) {
      std::cout << ", kappa " << *s.kappa;
    }
    if (s.cov) {
      std::cout << ", cov " << *s.cov;
    }
  }
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-event probability estimation: crude Monte Carlo, Subset Simulation, Bayesian Subset Simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
  std::optional<std::string> out;
  auto* run = app.add_subcommand("run", "Run an experiment described by a configuration file");
  run->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Master seed (overrides the file)");
  run->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
  run->add_option("--out", out, "Output directory (overrides the file)");

  raresim::Table4Options table;
  auto* table4 = app.add_subcommand("table4", "Compare the three estimators on the cantilever beam");
  table4->add_option("--out", table.output_dir, "Output directory")->capture_default_str();
  table4->add_option("--seed", table.master_seed, "Master seed")->capture_default_str();
  table4->add_option("--jobs", table.jobs, "Worker threads (0 = all cores)");
  table4->add_option("--replications", table.replications, "Replications of each subset estimator")
      ->capture_default_str();
  table4->add_option("--mc-samples", table.mc_samples, "Sample size of the crude Monte Carlo reference")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const raresim::LogLevel log = raresim::log_level_from_env();
  try {
    if (*run) {
      raresim::ExperimentConfig config = raresim::load_config(config_path);
      if (seed) {
        config.master_seed = *seed;
      }
      if (out) {
        config.output_dir = *out;
      }
      raresim::RunOptions options;
      options.jobs = jobs;
      options.log = log;
      print_stats(raresim::run_experiment(config, options));
      std::cout << "artifacts written to " << config.output_dir << "\n";
      return 0;
    }
    if (*table4) {
      table.log = log;
      for (const auto& result : raresim::run_table4(table)) {
        print_stats(result);
      }
      std::cout << "table written to " << table.output_dir << "/table4.csv\n";
      return 0;
    }
  } catch (const raresim::ExperimentError& e) {
    print_stats(e.result());
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
