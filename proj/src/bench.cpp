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

#include <raresim/bench.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace raresim {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt(double x) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", x);
  return buffer;
}

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InvalidInputError("cannot write '" + path.string() + "'");
  }
  out << text;
}

std::string csv_escape(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  if (s.find_first_of(",\"") != std::string::npos) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') {
        out += '"';
      }
      out += c;
    }
    return out + "\"";
  }
  return s;
}

std::string population_csv(const ParticlePopulation& pop) {
  std::ostringstream out;
  for (std::size_t j = 0; j < pop.dims(); ++j) {
    out << "x" << (j + 1) << ",";
  }
  out << "weight,cache\n";
  for (Eigen::Index i = 0; i < pop.points.rows(); ++i) {
    for (Eigen::Index j = 0; j < pop.points.cols(); ++j) {
      out << fmt(pop.points(i, j)) << ",";
    }
    out << fmt(pop.weights(i)) << "," << fmt(pop.cache(i)) << "\n";
  }
  return out.str();
}

struct MinMeanMax {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

template <class Values>
MinMeanMax summarize(const Values& values) {
  MinMeanMax out;
  if (values.empty()) {
    return out;
  }
  out.min = *std::min_element(values.begin(), values.end());
  out.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  out.mean = sum / static_cast<double>(values.size());
  return out;
}

ordered_json to_json(const MinMeanMax& s) { return {{"mean", s.mean}, {"min", s.min}, {"max", s.max}}; }

}  // namespace

ReplicationStats compute_stats(std::span<const double> estimates, std::optional<double> reference) {
  if (estimates.empty()) {
    throw InvalidInputError("compute_stats: at least one estimate is required");
  }
  if (reference && !(*reference > 0.0)) {
    throw InvalidInputError("compute_stats: reference must be positive");
  }
  std::vector<double> sorted(estimates.begin(), estimates.end());
  std::sort(sorted.begin(), sorted.end());
  const auto r = static_cast<double>(sorted.size());
  double sum = 0.0;
  for (double v : sorted) {
    sum += v;
  }
  ReplicationStats stats;
  stats.replications = sorted.size();
  stats.mean = sum / r;
  if (sorted.size() > 1) {
    double ss = 0.0;
    for (double v : sorted) {
      ss += (v - stats.mean) * (v - stats.mean);
    }
    stats.sd = std::sqrt(ss / (r - 1.0));
    if (stats.mean != 0.0) {
      stats.cov_self = *stats.sd / std::abs(stats.mean);
    }
  }
  if (reference) {
    stats.reference = reference;
    stats.kappa = std::abs((stats.mean - *reference) / *reference);
    if (stats.sd) {
      stats.cov = *stats.sd / *reference;
    }
  }
  return stats;
}

std::vector<double> ExperimentResult::estimates() const {
  std::vector<double> out;
  for (const auto& run : runs) {
    if (run.report) {
      out.push_back(run.report->estimate);
    }
  }
  return out;
}

bool ExperimentResult::acceptable() const {
  return static_cast<double>(failures) <= 0.2 * static_cast<double>(runs.size());
}

LogLevel log_level_from_env() {
  const char* value = std::getenv("RARESIM_LOG");
  if (value == nullptr) {
    return LogLevel::kOff;
  }
  const std::string v(value);
  if (v == "info") {
    return LogLevel::kInfo;
  }
  if (v == "trace") {
    return LogLevel::kTrace;
  }
  return LogLevel::kOff;
}

EstimateReport run_replication(const ExperimentConfig& config, const ReliabilityProblem& problem, std::uint64_t seed,
                               const PopulationObserver& observer) {
  Rng rng(seed);
  EstimateReport report;
  switch (config.method) {
    case Method::kMonteCarlo:
      report = crude_mc(problem, config.m, rng);
      break;
    case Method::kSubsetSimulation: {
      SubsimConfig c = config.subsim_config();
      c.observer = observer;
      report = classic_subsim(problem, c, rng);
      break;
    }
    case Method::kBayesianSubsetSimulation: {
      BssConfig c = config.bss_config();
      c.observer = observer;
      report = bayesian_subsim(problem, c, rng);
      break;
    }
  }
  report.seed = seed;
  return report;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const ReliabilityProblem problem = config.build_problem();
  ExperimentResult result;
  result.config = config;
  result.runs.resize(config.replications);

  const fs::path out_dir(config.output_dir);
  const fs::path trace_dir = out_dir / "trace";
  if (options.write_files) {
    fs::create_directories(out_dir);
    if (options.log == LogLevel::kTrace) {
      fs::create_directories(trace_dir);
    }
  }

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < config.replications; k = next++) {
      RunOutcome& outcome = result.runs[k];
      outcome.index = k;
      outcome.seed = derive_seed(config.master_seed, k);
      PopulationObserver observer;
      if (options.log == LogLevel::kTrace && options.write_files) {
        observer = [&trace_dir, k](int stage, const ParticlePopulation& pop) {
          write_text(trace_dir / ("run" + std::to_string(k) + "_stage" + std::to_string(stage) + "_population.csv"),
                     population_csv(pop));
        };
      }
      try {
        outcome.report = run_replication(config, problem, outcome.seed, observer);
      } catch (const std::exception& e) {
        outcome.error = e.what();
      }
      if (options.log != LogLevel::kOff) {
        std::lock_guard<std::mutex> lock(log_mutex);
        if (outcome.report) {
          std::cerr << "[raresim] run " << k << " " << to_string(config.method) << " estimate "
                    << fmt(outcome.report->estimate) << " N " << outcome.report->total_evaluations << "\n";
        } else {
          std::cerr << "[raresim] run " << k << " failed: " << outcome.error << "\n";
        }
      }
    }
  };
  std::size_t jobs = options.jobs == 0 ? std::max(1U, std::thread::hardware_concurrency()) : options.jobs;
  jobs = std::min(jobs, config.replications);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }

  for (const auto& run : result.runs) {
    if (!run.report) {
      ++result.failures;
    }
  }
  const auto estimates = result.estimates();
  if (!estimates.empty()) {
    result.stats = compute_stats(estimates, config.reference);
  }
  if (options.write_files) {
    write_text(out_dir / "summary.json", summary_json(result));
    write_text(out_dir / "runs.csv", runs_csv(result));
    write_text(out_dir / "stages.csv", stages_csv(result));
    if (options.log == LogLevel::kTrace && config.method == Method::kBayesianSubsetSimulation) {
      std::ostringstream learning;
      learning << "run,t,step,mean_tau,selected\n";
      for (const auto& run : result.runs) {
        if (!run.report) {
          continue;
        }
        for (const auto& stage : run.report->stages) {
          for (std::size_t s = 0; s < stage.tau_trace.size(); ++s) {
            std::string point;
            if (s < stage.selected_points.size()) {
              for (std::size_t j = 0; j < stage.selected_points[s].size(); ++j) {
                point += (j ? ";" : "") + fmt(stage.selected_points[s][j]);
              }
            }
            learning << run.index << "," << stage.index << "," << s << "," << fmt(stage.tau_trace[s]) << "," << point
                     << "\n";
          }
        }
      }
      write_text(trace_dir / "learning.csv", learning.str());
    }
  }
  if (!result.acceptable()) {
    throw ExperimentError("experiment: " + std::to_string(result.failures) + " of " +
                              std::to_string(result.runs.size()) + " replications failed",
                          result);
  }
  return result;
}

std::string summary_json(const ExperimentResult& result) {
  const ExperimentConfig& c = result.config;
  const ReliabilityProblem problem = c.build_problem();
  ordered_json doc;
  doc["method"] = to_string(c.method);
  doc["problem"] = {{"name", problem.name},
                    {"means", problem.input.means()},
                    {"sds", problem.input.sds()},
                    {"threshold", problem.failure_threshold}};
  ordered_json params{{"m", c.m}, {"p0", c.p0}};
  if (c.method == Method::kBayesianSubsetSimulation) {
    params["n0"] = c.n0;
    params["eta_intermediate"] = c.eta_intermediate;
    params["eta_final"] = c.eta_final;
    params["stage_budget"] = c.stage_budget;
    params["max_stages"] = c.max_stages;
    params["nu"] = to_string(c.nu);
    params["reml_starts"] = c.reml_starts;
  }
  if (c.method != Method::kMonteCarlo) {
    params["sweeps"] = c.effective_sweeps();
    params["proposal_sds"] = c.proposal_sds.value_or(problem.input.sds());
  }
  doc["parameters"] = params;
  doc["master_seed"] = c.master_seed;
  doc["replications"] = result.runs.size();
  doc["successful"] = result.runs.size() - result.failures;
  doc["failures"] = result.failures;
  ordered_json failed = ordered_json::array();
  for (const auto& run : result.runs) {
    if (!run.report) {
      failed.push_back({{"run", run.index}, {"seed", run.seed}, {"error", run.error}});
    }
  }
  doc["failed_runs"] = failed;

  ordered_json estimate;
  if (result.stats) {
    const ReplicationStats& s = *result.stats;
    estimate["mean"] = s.mean;
    estimate["sd"] = optional_number(s.sd);
    estimate["reference"] = optional_number(s.reference);
    estimate["kappa"] = optional_number(s.kappa);
    if (s.cov) {
      estimate["cov"] = *s.cov;
    }
    if (s.cov_self) {
      estimate["cov_self"] = *s.cov_self;
    }
  }
  if (c.method == Method::kMonteCarlo && result.runs.size() == 1 && result.runs.front().report) {
    const auto& report = *result.runs.front().report;
    estimate["binomial_sd"] = optional_number(report.binomial_sd);
    if (report.binomial_sd && c.reference) {
      estimate["binomial_cov"] = *report.binomial_sd / *c.reference;
    }
  }
  doc["estimate"] = estimate;

  std::vector<double> evaluations;
  std::vector<double> nominal;
  std::vector<double> stage_counts;
  std::map<int, std::vector<double>> per_stage;
  for (const auto& run : result.runs) {
    if (!run.report) {
      continue;
    }
    evaluations.push_back(static_cast<double>(run.report->total_evaluations));
    if (run.report->nominal_evaluations) {
      nominal.push_back(static_cast<double>(*run.report->nominal_evaluations));
    }
    stage_counts.push_back(static_cast<double>(run.report->stages.size()));
    for (const auto& stage : run.report->stages) {
      per_stage[stage.index].push_back(static_cast<double>(stage.evaluations));
    }
  }
  doc["evaluations"] = to_json(summarize(evaluations));
  if (!nominal.empty()) {
    doc["nominal_evaluations"] = to_json(summarize(nominal));
  }
  ordered_json stages = to_json(summarize(stage_counts));
  ordered_json mean_per_stage = ordered_json::array();
  for (const auto& [index, values] : per_stage) {
    mean_per_stage.push_back({{"t", index}, {"runs", values.size()}, {"mean_evaluations", summarize(values).mean}});
  }
  stages["per_stage"] = mean_per_stage;
  doc["stages"] = stages;
  return doc.dump(2) + "\n";
}

std::string runs_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "run,seed,status,estimate,total_evaluations,nominal_evaluations,stages,acceptance_rate,error\n";
  for (const auto& run : result.runs) {
    out << run.index << "," << run.seed << ",";
    if (run.report) {
      const auto& r = *run.report;
      out << "ok," << fmt(r.estimate) << "," << r.total_evaluations << ","
          << (r.nominal_evaluations ? std::to_string(*r.nominal_evaluations) : std::string()) << ","
          << r.stages.size() << "," << fmt(r.acceptance_rate) << ",\n";
    } else {
      out << "failed,,,,,," << csv_escape(run.error) << "\n";
    }
  }
  return out.str();
}

std::string stages_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "run,t,u_t,factor,N_t,mean_tau\n";
  for (const auto& run : result.runs) {
    if (!run.report) {
      continue;
    }
    for (const auto& s : run.report->stages) {
      out << run.index << "," << s.index << "," << fmt(s.threshold) << "," << fmt(s.factor) << "," << s.evaluations
          << "," << fmt(s.mean_misclassification) << "\n";
    }
  }
  return out.str();
}

std::vector<ExperimentResult> run_table4(const Table4Options& options) {
  const fs::path root(options.output_dir);
  fs::create_directories(root);
  RunOptions run_options;
  run_options.jobs = options.jobs;
  run_options.log = options.log;

  ExperimentConfig mc = paper_cantilever_profile();
  mc.method = Method::kMonteCarlo;
  mc.m = options.mc_samples;
  mc.replications = 1;
  mc.reference = options.reference;
  mc.master_seed = options.master_seed;
  mc.output_dir = (root / "mc").string();

  ExperimentConfig subsim = paper_cantilever_profile();
  subsim.method = Method::kSubsetSimulation;
  subsim.replications = options.replications;
  subsim.reference = options.reference;
  subsim.master_seed = options.master_seed;
  subsim.output_dir = (root / "subsim").string();

  ExperimentConfig bss = paper_cantilever_profile();
  bss.replications = options.replications;
  bss.reference = options.reference;
  bss.master_seed = options.master_seed;
  bss.output_dir = (root / "bss").string();

  std::vector<ExperimentResult> results;
  for (const auto& config : {mc, subsim, bss}) {
    results.push_back(run_experiment(config, run_options));
  }

  ordered_json rows = ordered_json::array();
  std::ostringstream csv;
  csv << "method,m,N,N_min,N_max,mean_estimate,sd,kappa,cov\n";
  for (const auto& r : results) {
    const auto& stats = *r.stats;
    std::vector<double> n;
    std::vector<double> nominal;
    for (const auto& run : r.runs) {
      if (run.report) {
        n.push_back(static_cast<double>(run.report->total_evaluations));
        if (run.report->nominal_evaluations) {
          nominal.push_back(static_cast<double>(*run.report->nominal_evaluations));
        }
      }
    }
    const MinMeanMax evals = summarize(nominal.empty() ? n : nominal);
    std::optional<double> sd = stats.sd;
    std::optional<double> cov = stats.cov;
    if (r.config.method == Method::kMonteCarlo && r.runs.front().report) {
      sd = r.runs.front().report->binomial_sd;
      cov = *sd / options.reference;
    }
    ordered_json row{{"method", to_string(r.config.method)},
                     {"m", r.config.m},
                     {"N", evals.mean},
                     {"N_min", evals.min},
                     {"N_max", evals.max},
                     {"mean_estimate", stats.mean},
                     {"sd", optional_number(sd)},
                     {"kappa", optional_number(stats.kappa)},
                     {"cov", optional_number(cov)}};
    if (!nominal.empty()) {
      row["counted_evaluations"] = to_json(summarize(n));
    }
    rows.push_back(row);
    csv << to_string(r.config.method) << "," << r.config.m << "," << fmt(evals.mean) << "," << fmt(evals.min) << ","
        << fmt(evals.max) << "," << fmt(stats.mean) << "," << (sd ? fmt(*sd) : "") << ","
        << (stats.kappa ? fmt(*stats.kappa) : "") << "," << (cov ? fmt(*cov) : "") << "\n";
  }
  write_text(root / "table4.json", rows.dump(2) + "\n");
  write_text(root / "table4.csv", csv.str());
  return results;
}

}  // namespace raresim
