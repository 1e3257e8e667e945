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

#include <raresim/excursion.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

namespace raresim {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_normal_cdf(double z) {
  if (z >= 0.0) {
    return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  }
  if (z > -30.0) {
    return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  }
  // Asymptotic expansion of the Mills ratio.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double excursion_prob(const Prediction& prediction, double threshold) {
  const double sd = prediction.sd();
  if (sd == 0.0) {
    return prediction.mean > threshold ? 1.0 : 0.0;
  }
  return normal_cdf((prediction.mean - threshold) / sd);
}

double log_excursion_prob(const Prediction& prediction, double threshold) {
  const double sd = prediction.sd();
  if (sd == 0.0) {
    return prediction.mean > threshold ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  return log_normal_cdf((prediction.mean - threshold) / sd);
}

double misclassification(const Prediction& prediction, double threshold) {
  const double g = excursion_prob(prediction, threshold);
  return std::min(g, 1.0 - g);
}

std::vector<Prediction> Surrogate::predict(const PointMatrix& points) const {
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out.push_back(predict(row_view(points, i)));
  }
  return out;
}

GpSurrogate::GpSurrogate(GpModel model, RemlConfig config, bool refit_on_observe)
    : model_(std::move(model)), config_(std::move(config)), refit_on_observe_(refit_on_observe) {
  config_.warm_start.reset();
}

GpSurrogate GpSurrogate::fit(const PointMatrix& designs, const Vector& observations, std::vector<double> input_scales,
                             const RemlConfig& config) {
  return {fit_gp(designs, observations, std::move(input_scales), config), config};
}

void GpSurrogate::observe(Point x, double y) {
  GpModel next = model_.add_observation(x, y);
  if (refit_on_observe_) {
    RemlConfig refit = config_;
    refit.warm_start = next.params().lengthscales;
    refit.fresh_starts = 1;
    refit.start_offset = 1 + refits_ % std::max<std::size_t>(config_.starts - 1, 1);
    ++refits_;
    const RemlFit fit = fit_reml(next.scaled_designs(), next.observations(), refit);
    next = next.with_params(fit.params).with_degenerate_flag(fit.degenerate);
  }
  model_ = std::move(next);
}

std::string ExactSurrogate::to_json() const {
  return nlohmann::json{{"kind", "exact"}, {"observations", count_}}.dump(2);
}

std::size_t select_max_misclassification(const Surrogate& model, const std::vector<double>& tau,
                                         const PointMatrix& candidates) {
  if (candidates.rows() == 0) {
    throw InvalidInputError("select_next_point: empty candidate set");
  }
  if (tau.size() != static_cast<std::size_t>(candidates.rows())) {
    throw InvalidInputError("select_next_point: one misclassification value per candidate is required");
  }
  std::vector<std::size_t> order(tau.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  // Descending tau, ascending index among ties.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tau[a] > tau[b]; });
  for (std::size_t i : order) {
    if (!model.is_duplicate(row_view(candidates, static_cast<Eigen::Index>(i)))) {
      return i;
    }
  }
  throw NoSelectablePointError("select_next_point: every candidate duplicates a design point");
}

std::size_t select_next_point(const Surrogate& model, double threshold, const PointMatrix& candidates) {
  if (candidates.rows() == 0) {
    throw InvalidInputError("select_next_point: empty candidate set");
  }
  const auto predictions = model.predict(candidates);
  std::vector<double> tau(predictions.size());
  for (std::size_t i = 0; i < tau.size(); ++i) {
    tau[i] = misclassification(predictions[i], threshold);
  }
  return select_max_misclassification(model, tau, candidates);
}

double mean_misclassification(const Surrogate& model, double threshold, const PointMatrix& particles) {
  if (particles.rows() == 0) {
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& p : model.predict(particles)) {
    sum += misclassification(p, threshold);
  }
  return sum / static_cast<double>(particles.rows());
}

StageLearningResult run_stage_learning(Surrogate& model, CountingEvaluator& evaluator, double threshold,
                                       const PointMatrix& particles, double eta, std::size_t budget) {
  if (!(eta > 0.0)) {
    throw InvalidInputError("run_stage_learning: eta must be positive");
  }
  if (!std::isfinite(threshold)) {
    throw InvalidInputError("run_stage_learning: threshold must be finite");
  }
  StageLearningResult result;
  while (true) {
    std::vector<double> tau;
    double mean = 0.0;
    try {
      const auto predictions = model.predict(particles);
      tau.resize(predictions.size());
      for (std::size_t i = 0; i < tau.size(); ++i) {
        tau[i] = misclassification(predictions[i], threshold);
        mean += tau[i];
      }
      mean /= static_cast<double>(std::max<Eigen::Index>(particles.rows(), 1));
    } catch (const Error& e) {
      throw StageLearningError(std::string("stage learning: prediction failed: ") + e.what(), result, model.to_json());
    }
    result.mean_tau_trace.push_back(mean);
    if (mean <= eta) {
      result.reached_tolerance = true;
      break;
    }
    if (result.evaluations >= budget) {
      break;
    }
    try {
      const std::size_t index = select_max_misclassification(model, tau, particles);
      const Point x = row_view(particles, static_cast<Eigen::Index>(index));
      const double y = evaluator(x);
      ++result.evaluations;
      result.selected_points.emplace_back(x.begin(), x.end());
      result.selected_values.push_back(y);
      model.observe(x, y);
    } catch (const Error& e) {
      throw StageLearningError(std::string("stage learning: ") + e.what(), result, model.to_json());
    }
  }
  return result;
}

}  // namespace raresim
