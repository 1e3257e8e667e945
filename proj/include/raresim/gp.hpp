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

#ifndef RARESIM_GP_HPP
#define RARESIM_GP_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <raresim/types.hpp>

namespace raresim {

/// Smoothness index of the Matérn family. Only the closed-form half-integer cases are supported.
enum class Smoothness { kHalf, kThreeHalves, kFiveHalves };

std::string to_string(Smoothness nu);
Smoothness smoothness_from_string(const std::string& text);

struct CovarianceParams {
  double variance = 1.0;
  std::vector<double> lengthscales;
  Smoothness nu = Smoothness::kFiveHalves;

  /// Throws InvalidInputError unless variance > 0 and every lengthscale > 0.
  void validate() const;
};

/// Matérn correlation at scaled distance r >= 0.
double matern_correlation(double r, Smoothness nu);

/// Matérn covariance between x and y with anisotropic lengthscales.
/// For nu = 5/2: variance * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r).
double matern_cov(Point x, Point y, const CovarianceParams& params);

/// Posterior mean and variance at one point.
struct Prediction {
  double mean = 0.0;
  double variance = 0.0;

  [[nodiscard]] double sd() const;
};

/// Relative diagonal jitter added before the first Cholesky attempt.
inline constexpr double kInitialJitter = 1e-10;
/// Largest relative jitter tried before a factorization is declared failed.
inline constexpr double kMaxJitter = 1e-4;
/// Two inputs closer than this in scaled coordinates count as the same design point.
/// For nu = 5/2, 1 - rho(r) ~ 5 r^2 / 6, so below sqrt(kInitialJitter) the rows are numerically identical.
inline constexpr double kDuplicateTolerance = 1e-5;

/// Noiseless Gaussian-process regression with a constant unknown mean (universal kriging).
///
/// Inputs are divided coordinate-wise by `input_scales` before entering the kernel, so
/// lengthscales are expressed in those scaled units. The model is an immutable value:
/// conditioning on a new observation returns a new model.
class GpModel {
 public:
  /// Factorizes the covariance of `designs`. Throws InvalidInputError on shape errors or when
  /// fewer than two designs are given, and FittingError if the covariance is not SPD even at
  /// the largest jitter.
  static GpModel condition(PointMatrix designs, Vector observations, CovarianceParams params,
                           std::vector<double> input_scales = {});

  /// Universal-kriging mean and variance at `x` (variance clamped at 0). At an existing design
  /// point (within kDuplicateTolerance) returns the observation with zero variance.
  [[nodiscard]] Prediction predict(Point x) const;
  [[nodiscard]] std::vector<Prediction> predict(const PointMatrix& points) const;

  /// Model conditioned on one more observation with the same covariance parameters.
  /// Throws DuplicatePointError when `x` coincides with an existing design.
  [[nodiscard]] GpModel add_observation(Point x, double y) const;

  /// Same data, different covariance parameters.
  [[nodiscard]] GpModel with_params(CovarianceParams params) const;

  [[nodiscard]] bool is_duplicate(Point x, double tolerance = kDuplicateTolerance) const;

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(designs_.rows()); }
  [[nodiscard]] std::size_t dims() const noexcept { return static_cast<std::size_t>(designs_.cols()); }
  [[nodiscard]] const PointMatrix& designs() const noexcept { return designs_; }
  /// Designs divided by the input scales.
  [[nodiscard]] const PointMatrix& scaled_designs() const noexcept { return scaled_; }
  [[nodiscard]] const Vector& observations() const noexcept { return observations_; }
  [[nodiscard]] const CovarianceParams& params() const noexcept { return params_; }
  [[nodiscard]] const std::vector<double>& input_scales() const noexcept { return input_scales_; }
  [[nodiscard]] double jitter() const noexcept { return jitter_; }
  /// Generalized least-squares estimate of the constant mean.
  [[nodiscard]] double mean_estimate() const noexcept { return beta_; }

  /// Set when the parameters came from a degenerate fit (constant observations).
  [[nodiscard]] bool degenerate() const noexcept { return degenerate_; }
  [[nodiscard]] GpModel with_degenerate_flag(bool flag) const;

  /// JSON document with designs, observations, params, input scales and flags.
  [[nodiscard]] std::string to_json() const;
  static GpModel from_json(const std::string& text);

  /// `x` divided by the input scales.
  [[nodiscard]] std::vector<double> scale_input(Point x) const;

 private:
  GpModel() = default;
  void factorize();

  PointMatrix designs_;
  PointMatrix scaled_;
  Vector observations_;
  CovarianceParams params_;
  std::vector<double> input_scales_;
  bool degenerate_ = false;

  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Vector alpha_;        // R^-1 (y - beta 1)
  Vector whitened_one_;  // L^-1 1
  double one_rinv_one_ = 0.0;
  double beta_ = 0.0;
};

/// Correlation matrix of scaled designs (unit variance, no jitter).
Eigen::MatrixXd correlation_matrix(const PointMatrix& scaled_designs, const std::vector<double>& lengthscales,
                                   Smoothness nu);

struct RemlConfig {
  Smoothness nu = Smoothness::kFiveHalves;
  std::size_t starts = 7;
  double min_lengthscale = 1e-2;
  double max_lengthscale = 1e2;
  /// Variance bounds relative to the sample variance of the observations.
  double min_relative_variance = 1e-6;
  double max_relative_variance = 1e6;
  std::size_t max_iterations = 400;
  /// Simplex size (log-lengthscale units) at which a local search stops.
  double tolerance = 1e-4;
  /// When set, the search starts here plus `fresh_starts` points of the start sequence.
  std::optional<std::vector<double>> warm_start;
  std::size_t fresh_starts = 1;
  /// Index of the first start-sequence point used for fresh starts in a warm refit.
  std::size_t start_offset = 0;
};

struct RemlFit {
  CovarianceParams params;
  /// Negative restricted log-likelihood (up to a constant) at `params`.
  double objective = 0.0;
  /// Observations were constant; `params` holds a floor variance and unit lengthscales.
  bool degenerate = false;
};

/// Negative restricted log-likelihood with the variance profiled out, or nullopt when the
/// correlation matrix cannot be factorized. Sets `profiled_variance` on success.
std::optional<double> reml_objective(const PointMatrix& scaled_designs, const Vector& observations,
                                     const std::vector<double>& lengthscales, Smoothness nu,
                                     double* profiled_variance = nullptr);

/// Maximizes the restricted likelihood (constant mean profiled out) over log-lengthscales by
/// multi-start Nelder–Mead; the variance follows in closed form and is clamped to its bounds.
/// Designs are in the same scaled units the lengthscales refer to.
/// Throws InvalidInputError when n < d + 2 and FittingError when no start yields a finite objective.
RemlFit fit_reml(const PointMatrix& scaled_designs, const Vector& observations, const RemlConfig& config = {});

/// Start points (log-lengthscales) used by fit_reml: index 0 is the isotropic unit lengthscale,
/// later indices follow a Halton sequence over [log 0.05, log 20]^d.
std::vector<double> reml_start_point(std::size_t index, std::size_t dims);

/// Fits hyperparameters by REML and conditions a model on the data.
GpModel fit_gp(const PointMatrix& designs, const Vector& observations, std::vector<double> input_scales,
               const RemlConfig& config = {});

}  // namespace raresim

#endif  // RARESIM_GP_HPP
