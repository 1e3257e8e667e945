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

#include <raresim/gp.hpp>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include <nlohmann/json.hpp>

#include <raresim/errors.hpp>

namespace raresim {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.2360679774997896;

double scaled_distance(const double* a, const double* b, const std::vector<double>& lengthscales) {
  double s = 0.0;
  for (std::size_t j = 0; j < lengthscales.size(); ++j) {
    const double t = (a[j] - b[j]) / lengthscales[j];
    s += t * t;
  }
  return std::sqrt(s);
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> chol;
  double jitter = 0.0;
};

// Cholesky of R + jitter * I with jitter escalated by decades from kInitialJitter to kMaxJitter.
std::optional<Factorization> factorize_with_jitter(const Eigen::MatrixXd& correlation) {
  const auto n = correlation.rows();
  for (double jitter = kInitialJitter; jitter <= kMaxJitter * 1.000001; jitter *= 10.0) {
    Eigen::MatrixXd r = correlation;
    r.diagonal().array() += jitter;
    Factorization f{Eigen::LLT<Eigen::MatrixXd>(r), jitter};
    if (f.chol.info() != Eigen::Success) {
      continue;
    }
    const auto diag = f.chol.matrixLLT().diagonal();
    bool ok = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) {
        ok = false;
        break;
      }
    }
    if (ok) {
      return f;
    }
  }
  return std::nullopt;
}

PointMatrix scale_rows(const PointMatrix& points, const std::vector<double>& scales) {
  PointMatrix out = points;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    out.col(j) /= scales[static_cast<std::size_t>(j)];
  }
  return out;
}

double sample_variance(const Vector& y) {
  if (y.size() < 2) {
    return 0.0;
  }
  const double mean = y.mean();
  return (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
}

struct GslMinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct GslVectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

struct ObjectiveContext {
  const PointMatrix* designs;
  const Vector* observations;
  Smoothness nu;
  double log_min;
  double log_max;
};

// Value penalized outside the lengthscale box; parameters are clamped before evaluation.
constexpr double kInfeasible = 1e12;

double penalized_objective(const std::vector<double>& log_ls, const ObjectiveContext& ctx) {
  std::vector<double> ls(log_ls.size());
  double penalty = 0.0;
  for (std::size_t j = 0; j < log_ls.size(); ++j) {
    const double clamped = std::clamp(log_ls[j], ctx.log_min, ctx.log_max);
    penalty += 1e3 * (log_ls[j] - clamped) * (log_ls[j] - clamped);
    ls[j] = std::exp(clamped);
  }
  const auto value = reml_objective(*ctx.designs, *ctx.observations, ls, ctx.nu);
  if (!value || !std::isfinite(*value)) {
    return kInfeasible + penalty;
  }
  return *value + penalty;
}

double gsl_objective(const gsl_vector* v, void* params) {
  const auto& ctx = *static_cast<const ObjectiveContext*>(params);
  std::vector<double> x(v->size);
  for (std::size_t j = 0; j < v->size; ++j) {
    x[j] = gsl_vector_get(v, j);
  }
  try {
    return penalized_objective(x, ctx);
  } catch (...) {
    return kInfeasible;
  }
}

struct LocalResult {
  std::vector<double> log_ls;
  double value;
};

LocalResult nelder_mead(std::vector<double> start, const ObjectiveContext& ctx, const RemlConfig& config) {
  const std::size_t d = start.size();
  for (double& v : start) {
    v = std::clamp(v, ctx.log_min, ctx.log_max);
  }
  if (d == 0) {
    return {start, penalized_objective(start, ctx)};
  }
  std::unique_ptr<gsl_multimin_fminimizer, GslMinimizerDeleter> minimizer(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, d));
  std::unique_ptr<gsl_vector, GslVectorDeleter> x(gsl_vector_alloc(d));
  std::unique_ptr<gsl_vector, GslVectorDeleter> step(gsl_vector_alloc(d));
  for (std::size_t j = 0; j < d; ++j) {
    gsl_vector_set(x.get(), j, start[j]);
    gsl_vector_set(step.get(), j, 0.5);
  }
  gsl_multimin_function fn{&gsl_objective, d, const_cast<ObjectiveContext*>(&ctx)};
  gsl_multimin_fminimizer_set(minimizer.get(), &fn, x.get(), step.get());
  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) {
      break;
    }
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(minimizer.get()), config.tolerance) == GSL_SUCCESS) {
      break;
    }
  }
  LocalResult out{std::vector<double>(d), minimizer->fval};
  for (std::size_t j = 0; j < d; ++j) {
    out.log_ls[j] = std::clamp(gsl_vector_get(minimizer->x, j), ctx.log_min, ctx.log_max);
  }
  out.value = penalized_objective(out.log_ls, ctx);
  return out;
}

double radical_inverse(std::size_t index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};

}  // namespace

std::string to_string(Smoothness nu) {
  switch (nu) {
    case Smoothness::kHalf:
      return "1/2";
    case Smoothness::kThreeHalves:
      return "3/2";
    case Smoothness::kFiveHalves:
      return "5/2";
  }
  return "5/2";
}

Smoothness smoothness_from_string(const std::string& text) {
  if (text == "1/2" || text == "0.5") {
    return Smoothness::kHalf;
  }
  if (text == "3/2" || text == "1.5") {
    return Smoothness::kThreeHalves;
  }
  if (text == "5/2" || text == "2.5") {
    return Smoothness::kFiveHalves;
  }
  throw InvalidInputError("unsupported Matérn smoothness '" + text + "' (expected 1/2, 3/2 or 5/2)");
}

void CovarianceParams::validate() const {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InvalidInputError("CovarianceParams: variance must be finite and positive");
  }
  if (lengthscales.empty()) {
    throw InvalidInputError("CovarianceParams: at least one lengthscale is required");
  }
  for (double l : lengthscales) {
    if (!(l > 0.0) || !std::isfinite(l)) {
      throw InvalidInputError("CovarianceParams: lengthscales must be finite and positive");
    }
  }
}

double matern_correlation(double r, Smoothness nu) {
  switch (nu) {
    case Smoothness::kHalf:
      return std::exp(-r);
    case Smoothness::kThreeHalves: {
      const double s = kSqrt3 * r;
      return (1.0 + s) * std::exp(-s);
    }
    case Smoothness::kFiveHalves: {
      const double s = kSqrt5 * r;
      return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
  }
  return 0.0;
}

double matern_cov(Point x, Point y, const CovarianceParams& params) {
  if (x.size() != y.size() || x.size() != params.lengthscales.size()) {
    throw InvalidInputError("matern_cov: dimension mismatch");
  }
  return params.variance * matern_correlation(scaled_distance(x.data(), y.data(), params.lengthscales), params.nu);
}

double Prediction::sd() const { return std::sqrt(std::max(variance, 0.0)); }

Eigen::MatrixXd correlation_matrix(const PointMatrix& scaled_designs, const std::vector<double>& lengthscales,
                                   Smoothness nu) {
  const auto n = scaled_designs.rows();
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index k = 0; k < i; ++k) {
      const double c =
          matern_correlation(scaled_distance(scaled_designs.row(i).data(), scaled_designs.row(k).data(), lengthscales),
                             nu);
      r(i, k) = c;
      r(k, i) = c;
    }
  }
  return r;
}

GpModel GpModel::condition(PointMatrix designs, Vector observations, CovarianceParams params,
                           std::vector<double> input_scales) {
  params.validate();
  const auto d = static_cast<std::size_t>(designs.cols());
  if (designs.rows() < 2) {
    throw InvalidInputError("GpModel: at least two observations are required");
  }
  if (observations.size() != designs.rows()) {
    throw InvalidInputError("GpModel: one observation per design point is required");
  }
  if (params.lengthscales.size() != d) {
    throw InvalidInputError("GpModel: one lengthscale per input dimension is required");
  }
  if (input_scales.empty()) {
    input_scales.assign(d, 1.0);
  }
  if (input_scales.size() != d) {
    throw InvalidInputError("GpModel: one input scale per input dimension is required");
  }
  for (double s : input_scales) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidInputError("GpModel: input scales must be finite and positive");
    }
  }
  if (!designs.allFinite() || !observations.allFinite()) {
    throw InvalidInputError("GpModel: designs and observations must be finite");
  }
  GpModel model;
  model.scaled_ = scale_rows(designs, input_scales);
  model.designs_ = std::move(designs);
  model.observations_ = std::move(observations);
  model.params_ = std::move(params);
  model.input_scales_ = std::move(input_scales);
  model.factorize();
  return model;
}

void GpModel::factorize() {
  auto f = factorize_with_jitter(correlation_matrix(scaled_, params_.lengthscales, params_.nu));
  if (!f) {
    throw FittingError("GpModel: covariance matrix is not positive definite even with the maximal jitter");
  }
  jitter_ = f->jitter;
  chol_ = std::move(f->chol);
  const auto n = scaled_.rows();
  whitened_one_ = chol_.matrixL().solve(Vector::Ones(n));
  one_rinv_one_ = whitened_one_.squaredNorm();
  const Vector whitened_y = chol_.matrixL().solve(observations_);
  beta_ = whitened_one_.dot(whitened_y) / one_rinv_one_;
  alpha_ = chol_.matrixU().solve(whitened_y - beta_ * whitened_one_);
  if (!std::isfinite(beta_) || !alpha_.allFinite()) {
    throw FittingError("GpModel: kriging system is numerically singular");
  }
}

std::vector<double> GpModel::scale_input(Point x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    z[j] = x[j] / input_scales_[j];
  }
  return z;
}

Prediction GpModel::predict(Point x) const {
  if (x.size() != dims()) {
    throw InvalidInputError("GpModel::predict: dimension mismatch");
  }
  const auto z = scale_input(x);
  const auto n = scaled_.rows();
  // Noiseless data: exact observation at a design point.
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double t = z[j] - scaled_(i, static_cast<Eigen::Index>(j));
      s += t * t;
    }
    if (s < kDuplicateTolerance * kDuplicateTolerance) {
      return {observations_(i), 0.0};
    }
  }
  Vector r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i) = matern_correlation(scaled_distance(z.data(), scaled_.row(i).data(), params_.lengthscales), params_.nu);
  }
  const double mean = beta_ + r.dot(alpha_);
  const Vector v = chol_.matrixL().solve(r);
  const double trend = 1.0 - whitened_one_.dot(v);
  const double variance = params_.variance * (1.0 - v.squaredNorm() + trend * trend / one_rinv_one_);
  if (!std::isfinite(mean) || !std::isfinite(variance)) {
    throw PredictionError("GpModel::predict: non-finite kriging prediction");
  }
  return {mean, std::max(variance, 0.0)};
}

std::vector<Prediction> GpModel::predict(const PointMatrix& points) const {
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out.push_back(predict(row_view(points, i)));
  }
  return out;
}

bool GpModel::is_duplicate(Point x, double tolerance) const {
  const auto z = scale_input(x);
  for (Eigen::Index i = 0; i < scaled_.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double t = z[j] - scaled_(i, static_cast<Eigen::Index>(j));
      s += t * t;
    }
    if (std::sqrt(s) < tolerance) {
      return true;
    }
  }
  return false;
}

GpModel GpModel::add_observation(Point x, double y) const {
  if (x.size() != dims()) {
    throw InvalidInputError("GpModel::add_observation: dimension mismatch");
  }
  if (is_duplicate(x)) {
    throw DuplicatePointError("GpModel::add_observation: point duplicates an existing design");
  }
  PointMatrix designs(designs_.rows() + 1, designs_.cols());
  designs.topRows(designs_.rows()) = designs_;
  for (std::size_t j = 0; j < x.size(); ++j) {
    designs(designs_.rows(), static_cast<Eigen::Index>(j)) = x[j];
  }
  Vector obs(observations_.size() + 1);
  obs.head(observations_.size()) = observations_;
  obs(observations_.size()) = y;
  GpModel out = condition(std::move(designs), std::move(obs), params_, input_scales_);
  out.degenerate_ = degenerate_;
  return out;
}

GpModel GpModel::with_params(CovarianceParams params) const {
  return condition(designs_, observations_, std::move(params), input_scales_);
}

GpModel GpModel::with_degenerate_flag(bool flag) const {
  GpModel out = *this;
  out.degenerate_ = flag;
  return out;
}

std::string GpModel::to_json() const {
  nlohmann::json doc;
  doc["designs"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < designs_.rows(); ++i) {
    doc["designs"].push_back(std::vector<double>(designs_.row(i).data(), designs_.row(i).data() + designs_.cols()));
  }
  doc["observations"] = std::vector<double>(observations_.data(), observations_.data() + observations_.size());
  doc["params"] = {{"variance", params_.variance}, {"lengthscales", params_.lengthscales}, {"nu", to_string(params_.nu)}};
  doc["input_scales"] = input_scales_;
  doc["jitter"] = jitter_;
  doc["degenerate"] = degenerate_;
  return doc.dump(2);
}

GpModel GpModel::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    const auto rows = doc.at("designs").get<std::vector<std::vector<double>>>();
    const auto obs = doc.at("observations").get<std::vector<double>>();
    if (rows.empty()) {
      throw InvalidInputError("GpModel::from_json: no designs");
    }
    PointMatrix designs(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) {
        throw InvalidInputError("GpModel::from_json: ragged design matrix");
      }
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        designs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    }
    CovarianceParams params;
    params.variance = doc.at("params").at("variance").get<double>();
    params.lengthscales = doc.at("params").at("lengthscales").get<std::vector<double>>();
    params.nu = smoothness_from_string(doc.at("params").at("nu").get<std::string>());
    auto scales = doc.value("input_scales", std::vector<double>{});
    GpModel model = condition(std::move(designs), Eigen::Map<const Vector>(obs.data(), static_cast<Eigen::Index>(obs.size())),
                              std::move(params), std::move(scales));
    model.degenerate_ = doc.value("degenerate", false);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("GpModel::from_json: ") + e.what());
  }
}

std::optional<double> reml_objective(const PointMatrix& scaled_designs, const Vector& observations,
                                     const std::vector<double>& lengthscales, Smoothness nu,
                                     double* profiled_variance) {
  const auto n = scaled_designs.rows();
  auto f = factorize_with_jitter(correlation_matrix(scaled_designs, lengthscales, nu));
  if (!f) {
    return std::nullopt;
  }
  const Vector w1 = f->chol.matrixL().solve(Vector::Ones(n));
  const Vector wy = f->chol.matrixL().solve(observations);
  const double s11 = w1.squaredNorm();
  const double beta = w1.dot(wy) / s11;
  const double q = (wy - beta * w1).squaredNorm();
  const double variance = q / static_cast<double>(n - 1);
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    return std::nullopt;
  }
  const double log_det = 2.0 * f->chol.matrixLLT().diagonal().array().log().sum();
  if (profiled_variance != nullptr) {
    *profiled_variance = variance;
  }
  return 0.5 * (static_cast<double>(n - 1) * std::log(variance) + log_det + std::log(s11));
}

std::vector<double> reml_start_point(std::size_t index, std::size_t dims) {
  std::vector<double> out(dims, 0.0);
  if (index == 0) {
    return out;
  }
  const double lo = std::log(0.05);
  const double hi = std::log(20.0);
  for (std::size_t j = 0; j < dims; ++j) {
    const unsigned base = kPrimes[j % std::size(kPrimes)];
    out[j] = lo + (hi - lo) * radical_inverse(index, base);
  }
  return out;
}

RemlFit fit_reml(const PointMatrix& scaled_designs, const Vector& observations, const RemlConfig& config) {
  const auto n = static_cast<std::size_t>(scaled_designs.rows());
  const auto d = static_cast<std::size_t>(scaled_designs.cols());
  if (observations.size() != scaled_designs.rows()) {
    throw InvalidInputError("fit_reml: one observation per design point is required");
  }
  if (n < d + 2) {
    throw InvalidInputError("fit_reml: at least d + 2 observations are required");
  }
  if (!(config.min_lengthscale > 0.0) || !(config.max_lengthscale >= config.min_lengthscale)) {
    throw InvalidInputError("fit_reml: invalid lengthscale bounds");
  }
  const double var_y = sample_variance(observations);
  if (!(var_y > 0.0)) {
    const double mean = observations.mean();
    RemlFit fit;
    fit.params.variance = config.min_relative_variance * std::max(1.0, mean * mean);
    fit.params.lengthscales.assign(d, 1.0);
    fit.params.nu = config.nu;
    fit.degenerate = true;
    return fit;
  }

  gsl_set_error_handler_off();
  ObjectiveContext ctx{&scaled_designs, &observations, config.nu, std::log(config.min_lengthscale),
                       std::log(config.max_lengthscale)};

  std::vector<std::vector<double>> starts;
  if (config.warm_start) {
    if (config.warm_start->size() != d) {
      throw InvalidInputError("fit_reml: warm start has the wrong dimension");
    }
    std::vector<double> warm(d);
    for (std::size_t j = 0; j < d; ++j) {
      warm[j] = std::log((*config.warm_start)[j]);
    }
    starts.push_back(std::move(warm));
    for (std::size_t k = 0; k < config.fresh_starts; ++k) {
      starts.push_back(reml_start_point(config.start_offset + k, d));
    }
  } else {
    for (std::size_t k = 0; k < std::max<std::size_t>(config.starts, 1); ++k) {
      starts.push_back(reml_start_point(k, d));
    }
  }

  std::optional<LocalResult> best;
  for (const auto& start : starts) {
    auto local = nelder_mead(start, ctx, config);
    if (!best || local.value < best->value) {
      best = std::move(local);
    }
  }
  if (!best || !(best->value < kInfeasible)) {
    throw FittingError("fit_reml: no start produced a factorizable covariance");
  }

  RemlFit fit;
  fit.params.nu = config.nu;
  fit.params.lengthscales.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    fit.params.lengthscales[j] = std::exp(best->log_ls[j]);
  }
  double variance = 0.0;
  const auto objective = reml_objective(scaled_designs, observations, fit.params.lengthscales, config.nu, &variance);
  if (!objective) {
    throw FittingError("fit_reml: optimum is not factorizable");
  }
  fit.objective = *objective;
  fit.params.variance =
      std::clamp(variance, config.min_relative_variance * var_y, config.max_relative_variance * var_y);
  return fit;
}

GpModel fit_gp(const PointMatrix& designs, const Vector& observations, std::vector<double> input_scales,
               const RemlConfig& config) {
  if (input_scales.empty()) {
    input_scales.assign(static_cast<std::size_t>(designs.cols()), 1.0);
  }
  if (input_scales.size() != static_cast<std::size_t>(designs.cols())) {
    throw InvalidInputError("fit_gp: one input scale per input dimension is required");
  }
  const RemlFit fit = fit_reml(scale_rows(designs, input_scales), observations, config);
  return GpModel::condition(designs, observations, fit.params, std::move(input_scales))
      .with_degenerate_flag(fit.degenerate);
}

}  // namespace raresim
