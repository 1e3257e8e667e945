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

#include <raresim/estimators.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace raresim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMonteCarloBlock = 100000;

double acceptance_rate(const MoveStats& stats) {
  return stats.proposals == 0 ? 0.0 : static_cast<double>(stats.accepted) / static_cast<double>(stats.proposals);
}

MoveConfig resolve_move(MoveConfig move, const InputDistribution& input) {
  if (move.proposal_sds.empty()) {
    move.proposal_sds = input.sds();
  }
  move.validate(input.dims());
  return move;
}

PointMatrix select_rows(const PointMatrix& points, const std::vector<std::size_t>& rows) {
  PointMatrix out(static_cast<Eigen::Index>(rows.size()), points.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = points.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::kMonteCarlo:
      return "mc";
    case Method::kSubsetSimulation:
      return "subsim";
    case Method::kBayesianSubsetSimulation:
      return "bss";
  }
  return "mc";
}

Method method_from_string(const std::string& text) {
  if (text == "mc") {
    return Method::kMonteCarlo;
  }
  if (text == "subsim") {
    return Method::kSubsetSimulation;
  }
  if (text == "bss") {
    return Method::kBayesianSubsetSimulation;
  }
  throw InvalidInputError("unknown method '" + text + "' (expected mc, subsim or bss)");
}

double EstimateReport::product_of_factors() const {
  double p = 1.0;
  for (const auto& s : stages) {
    p *= s.factor;
  }
  return p;
}

EstimateReport crude_mc(const ReliabilityProblem& problem, std::size_t m, Rng& rng) {
  if (m == 0) {
    throw InvalidInputError("crude_mc: m must be at least 1");
  }
  CountingEvaluator evaluate(problem);
  std::size_t above = 0;
  for (std::size_t done = 0; done < m;) {
    const std::size_t n = std::min(kMonteCarloBlock, m - done);
    const PointMatrix block = sample_input(problem.input, n, rng);
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      if (evaluate(row_view(block, i)) > problem.failure_threshold) {
        ++above;
      }
    }
    done += n;
  }
  EstimateReport report;
  report.method = Method::kMonteCarlo;
  report.estimate = static_cast<double>(above) / static_cast<double>(m);
  report.sample_size = m;
  report.total_evaluations = evaluate.count();
  report.binomial_sd = std::sqrt(report.estimate * (1.0 - report.estimate) / static_cast<double>(m));
  StageRecord stage;
  stage.index = 1;
  stage.threshold = problem.failure_threshold;
  stage.factor = report.estimate;
  stage.evaluations = evaluate.count();
  report.stages.push_back(std::move(stage));
  return report;
}

std::vector<std::size_t> maximin_indices(const PointMatrix& candidates, std::size_t n0) {
  const auto count = static_cast<std::size_t>(candidates.rows());
  if (n0 < 2 || count < n0) {
    throw InvalidInputError("maximin_doe: need at least n0 >= 2 candidates");
  }
  auto dist2 = [&](std::size_t a, std::size_t b) {
    return (candidates.row(static_cast<Eigen::Index>(a)) - candidates.row(static_cast<Eigen::Index>(b))).squaredNorm();
  };
  std::size_t first = 0;
  std::size_t second = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = i + 1; k < count; ++k) {
      const double dd = dist2(i, k);
      if (dd > best) {
        best = dd;
        first = i;
        second = k;
      }
    }
  }
  std::vector<std::size_t> chosen{first, second};
  std::vector<bool> taken(count, false);
  taken[first] = taken[second] = true;
  std::vector<double> nearest(count);
  for (std::size_t i = 0; i < count; ++i) {
    nearest[i] = std::min(dist2(i, first), dist2(i, second));
  }
  while (chosen.size() < n0) {
    std::size_t pick = count;
    double far = -1.0;
    for (std::size_t i = 0; i < count; ++i) {
      if (!taken[i] && nearest[i] > far) {
        far = nearest[i];
        pick = i;
      }
    }
    chosen.push_back(pick);
    taken[pick] = true;
    for (std::size_t i = 0; i < count; ++i) {
      nearest[i] = std::min(nearest[i], dist2(i, pick));
    }
  }
  return chosen;
}

PointMatrix maximin_doe(const PointMatrix& candidates, std::size_t n0) {
  return select_rows(candidates, maximin_indices(candidates, n0));
}

double level_ratio(std::span<const Prediction> predictions, std::span<const double> prev_g, double threshold) {
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double g = excursion_prob(predictions[i], threshold);
    if (g != 0.0) {
      sum += g / std::max(prev_g[i], kRatioFloor);
    }
  }
  return sum / static_cast<double>(predictions.size());
}

double solve_threshold(std::span<const Prediction> predictions, std::span<const double> prev_g, double u_final,
                       double p0) {
  if (predictions.empty() || predictions.size() != prev_g.size()) {
    throw InvalidInputError("solve_threshold: one previous probability per particle is required");
  }
  if (!(p0 > 0.0 && p0 < 1.0)) {
    throw InvalidInputError("solve_threshold: p0 must lie in (0, 1)");
  }
  if (!std::isfinite(u_final)) {
    throw InvalidInputError("solve_threshold: final threshold must be finite");
  }
  bool any_support = false;
  for (double g : prev_g) {
    if (!(g >= 0.0 && g <= 1.0)) {
      throw InvalidInputError("solve_threshold: previous probabilities must lie in [0, 1]");
    }
    any_support = any_support || g >= kRatioFloor;
  }
  if (!any_support) {
    throw InvalidInputError("solve_threshold: every previous probability is below the ratio floor");
  }
  if (level_ratio(predictions, prev_g, u_final) >= p0) {
    return u_final;
  }
  double scale = std::max(1.0, std::abs(u_final));
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& p : predictions) {
    scale = std::max({scale, std::abs(p.mean), p.sd()});
    lo = std::min(lo, p.mean - 40.0 * p.sd());
  }
  lo -= 1e-6 * scale;
  if (level_ratio(predictions, prev_g, lo) < p0) {
    throw DegenerateModelError("solve_threshold: level ratio stays below p0 at the lower bracket");
  }
  double hi = u_final;
  const double tolerance = 1e-9 * scale;
  for (int iter = 0; iter < 400 && hi - lo > tolerance; ++iter) {
    const double mid = lo + 0.5 * (hi - lo);
    if (level_ratio(predictions, prev_g, mid) >= p0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double solve_threshold(const PointMatrix& particles, const Surrogate& model, double u_final, double p0,
                       std::span<const double> prev_g) {
  const auto predictions = model.predict(particles);
  return solve_threshold(predictions, prev_g, u_final, p0);
}

double compute_bayes_alpha(const Surrogate& model, double threshold, const PointMatrix& sample) {
  if (sample.rows() == 0) {
    throw InvalidInputError("compute_bayes_alpha: empty sample");
  }
  double sum = 0.0;
  for (const auto& p : model.predict(sample)) {
    sum += excursion_prob(p, threshold);
  }
  return sum / static_cast<double>(sample.rows());
}

EstimateReport classic_subsim(const ReliabilityProblem& problem, const SubsimConfig& config, Rng& rng) {
  if (config.m < 10) {
    throw InvalidInputError("classic_subsim: m must be at least 10");
  }
  if (!(config.p0 > 0.0 && config.p0 < 1.0)) {
    throw InvalidInputError("classic_subsim: p0 must lie in (0, 1)");
  }
  const MoveConfig move = resolve_move(config.move, problem.input);
  const std::size_t m = config.m;
  const auto seeds = static_cast<std::size_t>(
      std::clamp<double>(std::round(config.p0 * static_cast<double>(m)), 1.0, static_cast<double>(m - 1)));
  const double u_final = problem.failure_threshold;

  CountingEvaluator evaluate(problem);
  PointMatrix initial = sample_input(problem.input, m, rng);
  Vector values(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    values(i) = evaluate(row_view(initial, i));
  }
  ParticlePopulation pop = ParticlePopulation::uniform(std::move(initial), values);
  if (config.observer) {
    config.observer(0, pop);
  }

  EstimateReport report;
  report.method = Method::kSubsetSimulation;
  report.sample_size = m;
  MoveStats stats;
  const std::vector<double> ones(m, 1.0);
  std::vector<Prediction> exact(m);
  std::vector<double> indicator(m);
  double u_prev = kNegInf;
  std::int64_t calls_before = 0;
  std::int64_t nominal = 0;

  for (std::size_t t = 1; t <= config.max_stages; ++t) {
    StageRecord stage;
    stage.index = static_cast<int>(t);
    stage.evaluations = evaluate.count() - calls_before;
    stage.nominal_evaluations =
        t == 1 ? static_cast<std::int64_t>(m) : static_cast<std::int64_t>((m - seeds) * move.sweeps);
    nominal += *stage.nominal_evaluations;
    calls_before = evaluate.count();

    for (std::size_t i = 0; i < m; ++i) {
      exact[i] = {pop.cache(static_cast<Eigen::Index>(i)), 0.0};
    }
    const double u = solve_threshold(exact, ones, u_final, config.p0);
    if (!(u > u_prev)) {
      throw DegenerateModelError("classic_subsim: stage " + std::to_string(t) + " threshold did not increase");
    }
    stage.threshold = u;
    const bool final_stage = u == u_final;
    if (final_stage) {
      for (std::size_t i = 0; i < m; ++i) {
        indicator[i] = pop.cache(static_cast<Eigen::Index>(i)) > u ? 1.0 : 0.0;
      }
    } else {
      // Highest f first; index order among ties keeps exactly `seeds` survivors.
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pop.cache(static_cast<Eigen::Index>(a)) > pop.cache(static_cast<Eigen::Index>(b));
      });
      std::fill(indicator.begin(), indicator.end(), 0.0);
      for (std::size_t k = 0; k < seeds; ++k) {
        indicator[order[k]] = 1.0;
      }
    }
    WeightResult weights;
    try {
      weights = compute_weights(indicator, ones);
    } catch (const DegeneratePopulationError& e) {
      throw DegeneratePopulationError("classic_subsim: stage " + std::to_string(t) + ": " + e.what());
    }
    stage.factor = weights.factor;
    report.stages.push_back(stage);
    if (final_stage) {
      report.estimate = report.product_of_factors();
      report.total_evaluations = evaluate.count();
      report.nominal_evaluations = nominal;
      report.acceptance_rate = acceptance_rate(stats);
      return report;
    }

    pop.weights = weights.weights;
    pop = multinomial_resample(pop, rng);
    const InputDistribution& input = problem.input;
    MoveTarget target;
    target.evaluate = [&evaluate, &input, u](Point x) {
      const double f = evaluate(x);
      return TargetValue{f > u ? input.logpdf(x) : kNegInf, f};
    };
    target.from_cache = [&input, u](Point x, double f) { return f > u ? input.logpdf(x) : kNegInf; };
    pop = mwg_move(pop, target, move, rng, &stats);
    pop.stage = static_cast<int>(t);
    if (config.observer) {
      config.observer(pop.stage, pop);
    }
    u_prev = u;
  }
  report.estimate = report.product_of_factors();
  report.total_evaluations = evaluate.count();
  report.nominal_evaluations = nominal;
  report.acceptance_rate = acceptance_rate(stats);
  throw NonConvergenceError("classic_subsim: failure threshold not reached within " +
                                std::to_string(config.max_stages) + " stages",
                            std::move(report));
}

SurrogateFactory gp_surrogate_factory(RemlConfig config) {
  return [config](const PointMatrix& designs, const Vector& observations,
                  const ReliabilityProblem& problem) -> std::unique_ptr<Surrogate> {
    return std::make_unique<GpSurrogate>(GpSurrogate::fit(designs, observations, problem.input.sds(), config));
  };
}

void BssConfig::validate(std::size_t dims) const {
  if (!(p0 > 0.0 && p0 < 1.0)) {
    throw InvalidInputError("BssConfig: p0 must lie in (0, 1)");
  }
  if (!(eta_final > 0.0) || !(eta_final <= eta_intermediate)) {
    throw InvalidInputError("BssConfig: need 0 < eta_final <= eta_intermediate");
  }
  if (n0 < dims + 2) {
    throw InvalidInputError("BssConfig: n0 must be at least d + 2");
  }
  if (m < n0 || m < 2) {
    throw InvalidInputError("BssConfig: m must be at least n0");
  }
  if (max_stages == 0) {
    throw InvalidInputError("BssConfig: max_stages must be positive");
  }
}

EstimateReport bayesian_subsim(const ReliabilityProblem& problem, const BssConfig& config, Rng& rng) {
  const InputDistribution& input = problem.input;
  config.validate(input.dims());
  const MoveConfig move = resolve_move(config.move, input);
  const SurrogateFactory factory = config.surrogate ? config.surrogate : gp_surrogate_factory(config.reml);
  const double u_final = problem.failure_threshold;
  const std::size_t m = config.m;

  CountingEvaluator evaluate(problem);
  ParticlePopulation pop = ParticlePopulation::uniform(sample_input(input, m, rng));
  if (config.observer) {
    config.observer(0, pop);
  }

  const auto design_rows = maximin_indices(input.standardize(pop.points), config.n0);
  const PointMatrix designs = select_rows(pop.points, design_rows);
  Vector observations(designs.rows());
  for (Eigen::Index i = 0; i < designs.rows(); ++i) {
    observations(i) = evaluate(row_view(designs, i));
  }
  std::unique_ptr<Surrogate> model = factory(designs, observations, problem);

  EstimateReport report;
  report.method = Method::kBayesianSubsetSimulation;
  report.sample_size = m;
  report.initial_design_size = config.n0;
  MoveStats stats;
  double u_prev = kNegInf;

  auto learn = [&](StageRecord& stage, double u, std::size_t budget) {
    const double eta = u == u_final ? config.eta_final : config.eta_intermediate;
    const StageLearningResult learned = run_stage_learning(*model, evaluate, u, pop.points, eta, budget);
    stage.evaluations += static_cast<std::int64_t>(learned.evaluations);
    stage.tau_trace.insert(stage.tau_trace.end(), learned.mean_tau_trace.begin(), learned.mean_tau_trace.end());
    stage.selected_points.insert(stage.selected_points.end(), learned.selected_points.begin(),
                                 learned.selected_points.end());
    stage.reached_tolerance = learned.reached_tolerance;
    return learned.evaluations;
  };

  for (std::size_t t = 1; t <= config.max_stages; ++t) {
    const std::string context = "bayesian_subsim: stage " + std::to_string(t) + ": ";
    StageRecord stage;
    stage.index = static_cast<int>(t);
    const std::span<const double> prev_g(pop.cache.data(), m);
    std::vector<Prediction> predictions;
    double u = 0.0;
    try {
      u = solve_threshold(model->predict(pop.points), prev_g, u_final, config.p0);
      std::size_t used = learn(stage, u, config.stage_budget);
      predictions = model->predict(pop.points);
      const double resolved = solve_threshold(predictions, prev_g, u_final, config.p0);
      if (resolved == u_final && u != u_final) {
        // The level moved onto the failure threshold: learn it at the final tolerance.
        used += learn(stage, resolved, config.stage_budget - std::min(used, config.stage_budget));
        predictions = model->predict(pop.points);
        u = solve_threshold(predictions, prev_g, u_final, config.p0);
      } else {
        u = resolved;
      }
    } catch (const DegenerateModelError& e) {
      throw DegenerateModelError(context + e.what());
    }
    if (!(u > u_prev)) {
      throw DegenerateModelError(context + "threshold did not increase");
    }
    stage.threshold = u;

    std::vector<double> g(m);
    double tau_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      g[i] = excursion_prob(predictions[i], u);
      tau_sum += std::min(g[i], 1.0 - g[i]);
    }
    stage.mean_misclassification = tau_sum / static_cast<double>(m);
    WeightResult weights;
    try {
      weights = compute_weights(g, prev_g);
    } catch (const DegeneratePopulationError& e) {
      throw DegeneratePopulationError(context + e.what());
    }
    stage.factor = weights.factor;
    report.stages.push_back(std::move(stage));
    if (u == u_final) {
      report.estimate = report.product_of_factors();
      report.total_evaluations = evaluate.count();
      report.acceptance_rate = acceptance_rate(stats);
      return report;
    }

    pop.weights = weights.weights;
    pop.cache = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(m));
    pop = multinomial_resample(pop, rng);
    const Surrogate& surrogate = *model;
    MoveTarget target;
    target.evaluate = [&surrogate, &input, u](Point x) {
      const Prediction p = surrogate.predict(x);
      const double log_g = log_excursion_prob(p, u);
      return TargetValue{input.logpdf(x) + log_g, excursion_prob(p, u)};
    };
    target.from_cache = [&input](Point x, double g) { return input.logpdf(x) + std::log(g); };
    pop = mwg_move(pop, target, move, rng, &stats);
    pop.stage = static_cast<int>(t);
    if (config.observer) {
      config.observer(pop.stage, pop);
    }
    u_prev = u;
  }
  report.estimate = report.product_of_factors();
  report.total_evaluations = evaluate.count();
  report.acceptance_rate = acceptance_rate(stats);
  throw NonConvergenceError("bayesian_subsim: failure threshold not reached within " +
                                std::to_string(config.max_stages) + " stages",
                            std::move(report));
}

}  // namespace raresim
