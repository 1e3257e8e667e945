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

#include <raresim/problem.hpp>

#include <cmath>
#include <numbers>
#include <string>

#include <raresim/errors.hpp>

namespace raresim {

namespace {

void check_point(std::size_t dims, Point x, const char* what) {
  if (x.size() != dims) {
    throw InvalidInputError(std::string(what) + ": expected " + std::to_string(dims) + " coordinates, got " +
                            std::to_string(x.size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw InvalidInputError(std::string(what) + ": non-finite coordinate");
    }
  }
}

}  // namespace

InputDistribution::InputDistribution(std::vector<double> means, std::vector<double> sds)
    : means_(std::move(means)), sds_(std::move(sds)), log_normalizer_(0.0) {
  if (means_.empty() || means_.size() != sds_.size()) {
    throw InvalidInputError("InputDistribution: means and sds must be non-empty and of equal length");
  }
  for (std::size_t j = 0; j < means_.size(); ++j) {
    if (!std::isfinite(means_[j])) {
      throw InvalidInputError("InputDistribution: non-finite mean");
    }
    if (!(sds_[j] > 0.0) || !std::isfinite(sds_[j])) {
      throw InvalidInputError("InputDistribution: standard deviations must be finite and strictly positive");
    }
    log_normalizer_ -= std::log(sds_[j] * std::sqrt(2.0 * std::numbers::pi));
  }
}

double InputDistribution::logpdf(Point x) const {
  double quad = 0.0;
  for (std::size_t j = 0; j < means_.size(); ++j) {
    const double z = (x[j] - means_[j]) / sds_[j];
    quad += z * z;
  }
  return log_normalizer_ - 0.5 * quad;
}

std::vector<double> InputDistribution::standardize(Point x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    z[j] = (x[j] - means_[j]) / sds_[j];
  }
  return z;
}

PointMatrix InputDistribution::standardize(const PointMatrix& points) const {
  PointMatrix z(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      z(i, j) = (points(i, j) - means_[j]) / sds_[j];
    }
  }
  return z;
}

double cantilever_performance(Point x) {
  return 18.46154 - 7.476923e10 * x[0] / (x[1] * x[1] * x[1]);
}

ReliabilityProblem cantilever_problem() {
  return {"cantilever", InputDistribution({0.001, 250.0}, {0.0002, 37.5}), cantilever_performance, 17.8};
}

ReliabilityProblem linear_problem(std::vector<double> coefficients, InputDistribution input, double threshold) {
  if (coefficients.size() != input.dims()) {
    throw InvalidInputError("linear_problem: one coefficient per input dimension is required");
  }
  auto f = [c = std::move(coefficients)](Point x) {
    double s = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      s += c[j] * x[j];
    }
    return s;
  };
  return {"linear", std::move(input), std::move(f), threshold};
}

double eval_performance(const ReliabilityProblem& problem, Point x) {
  check_point(problem.input.dims(), x, "eval_performance");
  const double y = problem.performance(x);
  if (!std::isfinite(y)) {
    throw EvaluationError("eval_performance: performance function returned a non-finite value");
  }
  return y;
}

PointMatrix sample_input(const InputDistribution& dist, std::size_t n, Rng& rng) {
  if (n == 0) {
    throw InvalidInputError("sample_input: n must be at least 1");
  }
  const auto d = static_cast<Eigen::Index>(dist.dims());
  PointMatrix out(static_cast<Eigen::Index>(n), d);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      out(i, j) = dist.means()[j] + dist.sds()[j] * normal(rng);
    }
  }
  return out;
}

double input_logpdf(const InputDistribution& dist, Point x) {
  check_point(dist.dims(), x, "input_logpdf");
  return dist.logpdf(x);
}

}  // namespace raresim
