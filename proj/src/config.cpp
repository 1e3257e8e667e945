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

#include <raresim/config.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <raresim/errors.hpp>

namespace raresim {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) {
    return {};
  }
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument(value);
    }
    return v;
  } catch (const std::exception&) {
    throw InvalidInputError("config: '" + key + "' expects a number, got '" + value + "'");
  }
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    // Accept integral values written in floating notation, e.g. 1e7.
    const double d = parse_double(key, value);
    if (d < 0.0 || d != std::floor(d) || d > 1.8e19) {
      throw InvalidInputError("config: '" + key + "' expects a nonnegative integer, got '" + value + "'");
    }
    return static_cast<std::uint64_t>(d);
  }
  return v;
}

std::vector<double> parse_list(const std::string& key, std::string value) {
  if (!value.empty() && value.front() == '[') {
    if (value.back() != ']') {
      throw InvalidInputError("config: unterminated list for '" + key + "'");
    }
    value = value.substr(1, value.size() - 2);
  }
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) {
      out.push_back(parse_double(key, item));
    }
  }
  if (out.empty()) {
    throw InvalidInputError("config: '" + key + "' expects a non-empty list");
  }
  return out;
}

void apply(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = unquote(raw);
  if (key == "problem") {
    c.problem = value;
  } else if (key == "method") {
    c.method = method_from_string(value);
  } else if (key == "means") {
    c.means = parse_list(key, value);
  } else if (key == "sds") {
    c.sds = parse_list(key, value);
  } else if (key == "coefficients") {
    c.coefficients = parse_list(key, value);
  } else if (key == "threshold") {
    c.threshold = parse_double(key, value);
  } else if (key == "m") {
    c.m = parse_unsigned(key, value);
  } else if (key == "p0") {
    c.p0 = parse_double(key, value);
  } else if (key == "n0") {
    c.n0 = parse_unsigned(key, value);
  } else if (key == "eta_intermediate") {
    c.eta_intermediate = parse_double(key, value);
  } else if (key == "eta_final") {
    c.eta_final = parse_double(key, value);
  } else if (key == "stage_budget") {
    c.stage_budget = parse_unsigned(key, value);
  } else if (key == "max_stages") {
    c.max_stages = parse_unsigned(key, value);
  } else if (key == "sweeps") {
    c.sweeps = parse_unsigned(key, value);
  } else if (key == "proposal_sds") {
    c.proposal_sds = parse_list(key, value);
  } else if (key == "nu") {
    c.nu = smoothness_from_string(value);
  } else if (key == "reml_starts") {
    c.reml_starts = parse_unsigned(key, value);
  } else if (key == "replications") {
    c.replications = parse_unsigned(key, value);
  } else if (key == "seed") {
    c.master_seed = parse_unsigned(key, value);
  } else if (key == "reference") {
    c.reference = parse_double(key, value);
  } else if (key == "out") {
    c.output_dir = value;
  } else {
    throw InvalidInputError("config: unknown key '" + key + "'");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (replications < 1) {
    throw InvalidInputError("config: replications must be at least 1");
  }
  if (reference && !(*reference > 0.0)) {
    throw InvalidInputError("config: reference must be positive");
  }
  if (m < 1) {
    throw InvalidInputError("config: m must be at least 1");
  }
  if (!(p0 > 0.0 && p0 < 1.0)) {
    throw InvalidInputError("config: p0 must lie in (0, 1)");
  }
  if (sweeps && *sweeps < 1) {
    throw InvalidInputError("config: sweeps must be at least 1");
  }
  const ReliabilityProblem p = build_problem();
  if (method == Method::kBayesianSubsetSimulation) {
    bss_config().validate(p.input.dims());
  }
  if (proposal_sds) {
    MoveConfig{*proposal_sds, effective_sweeps()}.validate(p.input.dims());
  }
}

ReliabilityProblem ExperimentConfig::build_problem() const {
  if (problem == "cantilever") {
    ReliabilityProblem p = cantilever_problem();
    if (means || sds) {
      p.input = InputDistribution(means.value_or(p.input.means()), sds.value_or(p.input.sds()));
      if (p.input.dims() != 2) {
        throw InvalidInputError("config: the cantilever problem has two inputs");
      }
    }
    if (threshold) {
      p.failure_threshold = *threshold;
    }
    if (coefficients) {
      throw InvalidInputError("config: 'coefficients' only applies to the linear problem");
    }
    return p;
  }
  if (problem == "linear") {
    if (!coefficients || !threshold) {
      throw InvalidInputError("config: the linear problem needs 'coefficients' and 'threshold'");
    }
    const std::size_t d = coefficients->size();
    InputDistribution input(means.value_or(std::vector<double>(d, 0.0)), sds.value_or(std::vector<double>(d, 1.0)));
    return linear_problem(*coefficients, std::move(input), *threshold);
  }
  throw InvalidInputError("config: unknown problem '" + problem + "' (expected cantilever or linear)");
}

std::size_t ExperimentConfig::effective_sweeps() const {
  if (sweeps) {
    return *sweeps;
  }
  return method == Method::kBayesianSubsetSimulation ? kBssDefaultSweeps : 1;
}

SubsimConfig ExperimentConfig::subsim_config() const {
  SubsimConfig c;
  c.m = m;
  c.p0 = p0;
  c.move.proposal_sds = proposal_sds.value_or(std::vector<double>{});
  c.move.sweeps = effective_sweeps();
  c.max_stages = std::max<std::size_t>(max_stages, 1);
  return c;
}

BssConfig ExperimentConfig::bss_config() const {
  BssConfig c;
  c.m = m;
  c.p0 = p0;
  c.n0 = n0;
  c.eta_intermediate = eta_intermediate;
  c.eta_final = eta_final;
  c.stage_budget = stage_budget;
  c.max_stages = max_stages;
  c.move.proposal_sds = proposal_sds.value_or(std::vector<double>{});
  c.move.sweeps = effective_sweeps();
  c.reml.nu = nu;
  c.reml.starts = reml_starts;
  return c;
}

ExperimentConfig paper_cantilever_profile() {
  ExperimentConfig c;
  c.problem = "cantilever";
  c.method = Method::kBayesianSubsetSimulation;
  c.m = 1000;
  c.p0 = 0.1;
  c.n0 = 10;
  c.eta_intermediate = 1e-6;
  c.eta_final = 1e-7;
  c.replications = 50;
  c.reference = 3.85e-5;
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::optional<std::string> profile;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInputError("config: line " + std::to_string(number) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw InvalidInputError("config: line " + std::to_string(number) + ": empty key or value");
    }
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (key == "profile") {
      profile = unquote(value);
      continue;
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  ExperimentConfig config;
  if (profile) {
    if (*profile != "paper-cantilever") {
      throw InvalidInputError("config: unknown profile '" + *profile + "'");
    }
    config = paper_cantilever_profile();
  }
  for (const auto& [key, value] : entries) {
    apply(config, key, value);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInputError("config: cannot open '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace raresim
