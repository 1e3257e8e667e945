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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <raresim/errors.hpp>
#include <raresim/gp.hpp>
#include <raresim/random.hpp>

namespace raresim {
namespace {

CovarianceParams params(double variance, std::vector<double> ls) {
  return CovarianceParams{variance, std::move(ls), Smoothness::kFiveHalves};
}

PointMatrix uniform_points(std::size_t n, std::size_t d, Rng& rng) {
  PointMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(i, j) = uniform01(rng);
    }
  }
  return x;
}

Vector sample_gp(const PointMatrix& x, const CovarianceParams& p, Rng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = matern_cov(row_view(x, i), row_view(x, j), p);
    }
    k(i, i) += 1e-10;
  }
  std::normal_distribution<double> z;
  Vector e(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    e(i) = z(rng);
  }
  return k.llt().matrixL() * e;
}

TEST(Matern, ClosedForm) {
  EXPECT_NEAR(matern_correlation(1.0, Smoothness::kFiveHalves), 0.52399, 1e-5);
  EXPECT_NEAR(matern_correlation(1.0, Smoothness::kFiveHalves),
              (1 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0)), 1e-15);
  EXPECT_NEAR(matern_correlation(1.0, Smoothness::kThreeHalves), (1 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0)),
              1e-15);
  EXPECT_NEAR(matern_correlation(1.0, Smoothness::kHalf), std::exp(-1.0), 1e-15);
  EXPECT_DOUBLE_EQ(matern_correlation(0.0, Smoothness::kFiveHalves), 1.0);
  EXPECT_LT(matern_correlation(200.0, Smoothness::kFiveHalves), 1e-100);

  const std::vector<double> x{0.3, -1.0};
  EXPECT_DOUBLE_EQ(matern_cov(x, x, params(2.5, {1.0, 3.0})), 2.5);
  const std::vector<double> y{0.3 + 2.0, -1.0};
  EXPECT_NEAR(matern_cov(x, y, params(1.0, {2.0, 1.0})), 0.52399, 1e-5);
  EXPECT_THROW(params(0.0, {1.0}).validate(), InvalidInputError);
  EXPECT_THROW(params(1.0, {-1.0}).validate(), InvalidInputError);
}

TEST(GpModel, HandAssembledTwoPointKriging) {
  const double r = 0.7;
  const double s2 = 1.8;
  PointMatrix x(2, 1);
  x << 0.0, r;
  Vector y(2);
  y << 1.0, 2.5;
  const GpModel gp = GpModel::condition(x, y, params(s2, {1.0}));

  const double rho = matern_correlation(r, Smoothness::kFiveHalves);
  const double det = 1 - rho * rho;
  const double beta = (y(0) + y(1)) / 2;
  const double one_r_one = 2 * (1 - rho) / det;
  const double x0 = 0.25;
  const double c1 = matern_correlation(x0, Smoothness::kFiveHalves);
  const double c2 = matern_correlation(r - x0, Smoothness::kFiveHalves);
  // R^-1 c and R^-1 (y - beta)
  const double a1 = (c1 - rho * c2) / det;
  const double a2 = (c2 - rho * c1) / det;
  const double mean = beta + a1 * (y(0) - beta) + a2 * (y(1) - beta);
  const double u = 1 - (a1 + a2);
  const double var = s2 * (1 - (a1 * c1 + a2 * c2) + u * u / one_r_one);

  const Prediction p = gp.predict(std::vector<double>{x0});
  EXPECT_NEAR(gp.mean_estimate(), beta, 1e-8);
  EXPECT_NEAR(p.mean, mean, 1e-8);
  EXPECT_NEAR(p.variance, var, 1e-8);
}

TEST(GpModel, InterpolatesDesignsAndRevertsFarAway) {
  Rng rng(3);
  const PointMatrix x = uniform_points(15, 2, rng);
  const auto truth = params(2.0, {0.4, 0.4});
  const Vector y = sample_gp(x, truth, rng);
  const GpModel gp = GpModel::condition(x, y, truth);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Prediction p = gp.predict(row_view(x, i));
    EXPECT_NEAR(p.mean, y(i), 1e-6 * std::max(1.0, std::abs(y(i))));
    EXPECT_LE(p.variance, 1e-8 * truth.variance);
  }
  const Prediction far = gp.predict(std::vector<double>{20.0, 20.0});
  // Prior variance plus the variance of the estimated constant mean.
  const Eigen::MatrixXd r = correlation_matrix(x, truth.lengthscales, truth.nu);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(15);
  const double expected = truth.variance * (1 + 1 / one.dot(r.ldlt().solve(one)));
  EXPECT_NEAR(far.variance, expected, 0.05 * expected);
  EXPECT_NEAR(far.mean, y.mean(), 3 * far.sd());
}

TEST(GpModel, ConditioningNeverIncreasesVariance) {
  Rng rng(5);
  const PointMatrix x = uniform_points(12, 2, rng);
  const auto p = params(1.0, {0.3, 0.5});
  const Vector y = sample_gp(x, p, rng);
  PointMatrix head = x.topRows(8);
  GpModel gp = GpModel::condition(head, y.head(8), p);
  const PointMatrix probes = uniform_points(200, 2, rng);
  for (Eigen::Index k = 8; k < 12; ++k) {
    const GpModel next = gp.add_observation(row_view(x, k), y(k));
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
      EXPECT_LE(next.predict(row_view(probes, i)).variance, gp.predict(row_view(probes, i)).variance + 1e-10);
    }
    gp = next;
  }
}

TEST(GpModel, AddObservationMatchesRebuild) {
  Rng rng(9);
  const PointMatrix x = uniform_points(10, 2, rng);
  const auto p = params(1.3, {0.5, 0.2});
  const Vector y = sample_gp(x, p, rng);
  const std::vector<double> scales{2.0, 0.5};
  const GpModel base = GpModel::condition(x.topRows(9), y.head(9), p, scales);
  const GpModel added = base.add_observation(row_view(x, 9), y(9));
  const GpModel rebuilt = GpModel::condition(x, y, p, scales);
  EXPECT_EQ(added.size(), base.size() + 1);
  EXPECT_NEAR(added.predict(row_view(x, 9)).mean, y(9), 1e-6 * std::max(1.0, std::abs(y(9))));
  const PointMatrix probes = uniform_points(50, 2, rng);
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    const Prediction a = added.predict(row_view(probes, i));
    const Prediction b = rebuilt.predict(row_view(probes, i));
    EXPECT_NEAR(a.mean, b.mean, 1e-8);
    EXPECT_NEAR(a.variance, b.variance, 1e-8);
  }
  EXPECT_THROW(added.add_observation(row_view(x, 3), 0.0), DuplicatePointError);
  std::vector<double> near(row_view(x, 3).begin(), row_view(x, 3).end());
  near[0] += 1e-7;
  EXPECT_TRUE(added.is_duplicate(near));
}

TEST(GpModel, NearDuplicatesEscalateJitter) {
  PointMatrix x(3, 1);
  x << 0.0, 2e-5, 1.0;
  Vector y(3);
  y << 0.0, 0.0, 1.0;
  const GpModel gp = GpModel::condition(x, y, params(1.0, {1.0}));
  EXPECT_GE(gp.jitter(), 1e-10);
  EXPECT_LE(gp.jitter(), 1e-4);
  EXPECT_TRUE(std::isfinite(gp.predict(std::vector<double>{0.5}).mean));
}

TEST(GpModel, JsonRoundTrip) {
  Rng rng(1);
  const PointMatrix x = uniform_points(6, 2, rng);
  const Vector y = sample_gp(x, params(1.0, {0.5, 0.5}), rng);
  const GpModel gp = GpModel::condition(x, y, params(0.7, {0.4, 0.9}), {1.5, 2.0});
  const GpModel back = GpModel::from_json(gp.to_json());
  const std::vector<double> probe{0.2, 0.8};
  EXPECT_DOUBLE_EQ(back.predict(probe).mean, gp.predict(probe).mean);
  EXPECT_DOUBLE_EQ(back.predict(probe).variance, gp.predict(probe).variance);
}

TEST(Reml, RecoversSimulatedParameters) {
  const auto truth = params(1.0, {0.3, 0.3});
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(77, seed));
    const PointMatrix x = uniform_points(60, 2, rng);
    const Vector y = sample_gp(x, truth, rng);
    const RemlFit fit = fit_reml(x, y);
    bool ok = std::abs(std::log(fit.params.variance)) <= 0.7;
    for (double l : fit.params.lengthscales) {
      ok = ok && std::abs(std::log(l / 0.3)) <= 0.7;
    }
    hits += ok ? 1 : 0;
  }
  EXPECT_GE(hits, 16);
}

TEST(Reml, ShiftInvariantAndScaleEquivariant) {
  Rng rng(21);
  const PointMatrix x = uniform_points(25, 2, rng);
  const Vector y = sample_gp(x, params(1.0, {0.4, 0.2}), rng);
  const RemlFit base = fit_reml(x, y);
  const RemlFit shifted = fit_reml(x, (y.array() + 5.0).matrix());
  const RemlFit scaled = fit_reml(x, y * 3.0);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(shifted.params.lengthscales[j], base.params.lengthscales[j], 1e-3 * base.params.lengthscales[j]);
    EXPECT_NEAR(scaled.params.lengthscales[j], base.params.lengthscales[j], 1e-3 * base.params.lengthscales[j]);
  }
  EXPECT_NEAR(shifted.params.variance, base.params.variance, 1e-3 * base.params.variance);
  EXPECT_NEAR(scaled.params.variance, 9.0 * base.params.variance, 9e-3 * base.params.variance);
}

TEST(Reml, ConstantObservationsAreDegenerate) {
  Rng rng(2);
  const PointMatrix x = uniform_points(6, 2, rng);
  const RemlFit fit = fit_reml(x, Vector::Constant(6, 4.0));
  EXPECT_TRUE(fit.degenerate);
  EXPECT_THROW(fit_reml(x.topRows(3), Vector::Zero(3)), InvalidInputError);
}

TEST(Reml, StartSequence) {
  const auto s0 = reml_start_point(0, 2);
  EXPECT_DOUBLE_EQ(s0[0], 0.0);
  EXPECT_DOUBLE_EQ(s0[1], 0.0);
  for (std::size_t k = 1; k < 10; ++k) {
    for (double v : reml_start_point(k, 3)) {
      EXPECT_GE(v, std::log(0.05));
      EXPECT_LE(v, std::log(20.0));
    }
  }
}

}  // namespace
}  // namespace raresim
