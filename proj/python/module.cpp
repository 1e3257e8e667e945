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

#include <memory>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <raresim/bench.hpp>
#include <raresim/config.hpp>
#include <raresim/errors.hpp>
#include <raresim/estimators.hpp>
#include <raresim/excursion.hpp>
#include <raresim/gp.hpp>
#include <raresim/problem.hpp>
#include <raresim/smc.hpp>

namespace py = pybind11;
using namespace raresim;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array to_array(Point x) { return Array(static_cast<py::ssize_t>(x.size()), x.data()); }

// Python callables are invoked with a 1-D float array and must return a float.
PerformanceFunction wrap(py::function fn) {
  auto holder = std::make_shared<py::function>(std::move(fn));
  return [holder](Point x) {
    py::gil_scoped_acquire gil;
    return (*holder)(to_array(x)).cast<double>();
  };
}

py::tuple predict_many(const GpModel& gp, const PointMatrix& points) {
  const auto preds = gp.predict(points);
  Array mean(static_cast<py::ssize_t>(preds.size()));
  Array var(static_cast<py::ssize_t>(preds.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    mean.mutable_at(i) = preds[i].mean;
    var.mutable_at(i) = preds[i].variance;
  }
  return py::make_tuple(mean, var);
}

std::vector<Prediction> predictions(const Array& means, const Array& variances) {
  if (means.size() != variances.size()) {
    throw InvalidInputError("means and variances must have equal length");
  }
  std::vector<Prediction> out(static_cast<std::size_t>(means.size()));
  for (py::ssize_t i = 0; i < means.size(); ++i) {
    out[static_cast<std::size_t>(i)] = {means.at(i), variances.at(i)};
  }
  return out;
}

MoveConfig move_config(std::optional<std::vector<double>> proposal_sds, std::size_t sweeps) {
  return MoveConfig{proposal_sds.value_or(std::vector<double>{}), sweeps};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Rare-event probability estimation with Bayesian Subset Simulation";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInputError>(m, "InvalidInputError", PyExc_ValueError);
  py::register_exception<EvaluationError>(m, "EvaluationError", error.ptr());
  py::register_exception<FittingError>(m, "FittingError", error.ptr());
  py::register_exception<PredictionError>(m, "PredictionError", error.ptr());
  py::register_exception<DuplicatePointError>(m, "DuplicatePointError", error.ptr());
  py::register_exception<NoSelectablePointError>(m, "NoSelectablePointError", error.ptr());
  py::register_exception<DegeneratePopulationError>(m, "DegeneratePopulationError", error.ptr());
  py::register_exception<DegenerateModelError>(m, "DegenerateModelError", error.ptr());

  // problem
  py::class_<InputDistribution>(m, "InputDistribution")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("means"), py::arg("sds"))
      .def_property_readonly("means", &InputDistribution::means)
      .def_property_readonly("sds", &InputDistribution::sds)
      .def_property_readonly("dims", &InputDistribution::dims)
      .def("logpdf", [](const InputDistribution& d, const Array& x) { return input_logpdf(d, to_vector(x)); })
      .def("sample", [](const InputDistribution& d, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        return sample_input(d, n, rng);
      }, py::arg("n"), py::arg("seed"));

  py::class_<ReliabilityProblem>(m, "ReliabilityProblem")
      .def(py::init([](std::string name, InputDistribution input, py::function f, double threshold) {
             return ReliabilityProblem{std::move(name), std::move(input), wrap(std::move(f)), threshold};
           }),
           py::arg("name"), py::arg("input"), py::arg("performance"), py::arg("threshold"))
      .def_readonly("name", &ReliabilityProblem::name)
      .def_readonly("input", &ReliabilityProblem::input)
      .def_readonly("failure_threshold", &ReliabilityProblem::failure_threshold)
      .def("__call__", [](const ReliabilityProblem& p, const Array& x) { return eval_performance(p, to_vector(x)); });

  m.def("cantilever_problem", &cantilever_problem);
  m.def("linear_problem", [](std::vector<double> coefficients, InputDistribution input, double threshold) {
    return linear_problem(std::move(coefficients), std::move(input), threshold);
  }, py::arg("coefficients"), py::arg("input"), py::arg("threshold"));

  // gp-kriging
  py::enum_<Smoothness>(m, "Smoothness")
      .value("HALF", Smoothness::kHalf)
      .value("THREE_HALVES", Smoothness::kThreeHalves)
      .value("FIVE_HALVES", Smoothness::kFiveHalves);

  py::class_<CovarianceParams>(m, "CovarianceParams")
      .def(py::init([](double variance, std::vector<double> lengthscales, Smoothness nu) {
             CovarianceParams p{variance, std::move(lengthscales), nu};
             p.validate();
             return p;
           }),
           py::arg("variance"), py::arg("lengthscales"), py::arg("nu") = Smoothness::kFiveHalves)
      .def_readonly("variance", &CovarianceParams::variance)
      .def_readonly("lengthscales", &CovarianceParams::lengthscales)
      .def_readonly("nu", &CovarianceParams::nu);

  m.def("matern_correlation", &matern_correlation, py::arg("r"), py::arg("nu") = Smoothness::kFiveHalves);
  m.def("matern_cov", [](const Array& x, const Array& y, const CovarianceParams& p) {
    return matern_cov(to_vector(x), to_vector(y), p);
  });

  py::class_<GpModel>(m, "GpModel")
      .def_static("condition", &GpModel::condition, py::arg("designs"), py::arg("observations"), py::arg("params"),
                  py::arg("input_scales") = std::vector<double>{})
      .def_static("from_json", &GpModel::from_json)
      .def("predict", [](const GpModel& gp, const Array& x) {
        const Prediction p = gp.predict(to_vector(x));
        return py::make_tuple(p.mean, p.variance);
      })
      .def("predict_many", &predict_many, py::arg("points"))
      .def("add_observation", [](const GpModel& gp, const Array& x, double y) {
        return gp.add_observation(to_vector(x), y);
      })
      .def("is_duplicate", [](const GpModel& gp, const Array& x) { return gp.is_duplicate(to_vector(x)); })
      .def_property_readonly("size", &GpModel::size)
      .def_property_readonly("params", &GpModel::params)
      .def_property_readonly("mean_estimate", &GpModel::mean_estimate)
      .def_property_readonly("jitter", &GpModel::jitter)
      .def("to_json", &GpModel::to_json);

  m.def("fit_gp", [](const PointMatrix& designs, const Vector& y, std::vector<double> scales, Smoothness nu,
                     std::size_t starts) {
    RemlConfig c;
    c.nu = nu;
    c.starts = starts;
    return fit_gp(designs, y, std::move(scales), c);
  }, py::arg("designs"), py::arg("observations"), py::arg("input_scales") = std::vector<double>{},
        py::arg("nu") = Smoothness::kFiveHalves, py::arg("starts") = 7);

  // excursion
  m.def("normal_cdf", &normal_cdf);
  m.def("excursion_prob", [](double mean, double variance, double u) { return excursion_prob({mean, variance}, u); },
        py::arg("mean"), py::arg("variance"), py::arg("threshold"));
  m.def("misclassification",
        [](double mean, double variance, double u) { return misclassification({mean, variance}, u); },
        py::arg("mean"), py::arg("variance"), py::arg("threshold"));

  // smc-engine
  m.def("compute_weights", [](const Array& num, const Array& den) {
    const auto a = to_vector(num);
    const auto b = to_vector(den);
    const WeightResult r = compute_weights(a, b);
    return py::make_tuple(r.weights, r.factor);
  }, py::arg("g_num"), py::arg("g_den"));
  m.def("multinomial_resample", [](const PointMatrix& points, const Vector& weights, std::uint64_t seed) {
    ParticlePopulation pop = ParticlePopulation::uniform(points);
    pop.weights = weights;
    Rng rng(seed);
    return multinomial_resample(pop, rng).points;
  }, py::arg("points"), py::arg("weights"), py::arg("seed"));

  // estimators
  m.def("maximin_indices", &maximin_indices, py::arg("candidates"), py::arg("n0"));
  m.def("level_ratio", [](const Array& means, const Array& variances, const Array& prev_g, double u) {
    const auto prev = to_vector(prev_g);
    return level_ratio(predictions(means, variances), prev, u);
  }, py::arg("means"), py::arg("variances"), py::arg("prev_g"), py::arg("threshold"));
  m.def("solve_threshold", [](const Array& means, const Array& variances, const Array& prev_g, double u_final,
                              double p0) {
    const auto prev = to_vector(prev_g);
    return solve_threshold(predictions(means, variances), prev, u_final, p0);
  }, py::arg("means"), py::arg("variances"), py::arg("prev_g"), py::arg("u_final"), py::arg("p0"));

  py::class_<StageRecord>(m, "StageRecord")
      .def_readonly("index", &StageRecord::index)
      .def_readonly("threshold", &StageRecord::threshold)
      .def_readonly("factor", &StageRecord::factor)
      .def_readonly("evaluations", &StageRecord::evaluations)
      .def_readonly("nominal_evaluations", &StageRecord::nominal_evaluations)
      .def_readonly("mean_misclassification", &StageRecord::mean_misclassification)
      .def_readonly("reached_tolerance", &StageRecord::reached_tolerance);

  py::class_<EstimateReport>(m, "EstimateReport")
      .def_property_readonly("method", [](const EstimateReport& r) { return to_string(r.method); })
      .def_readonly("estimate", &EstimateReport::estimate)
      .def_readonly("stages", &EstimateReport::stages)
      .def_readonly("total_evaluations", &EstimateReport::total_evaluations)
      .def_readonly("nominal_evaluations", &EstimateReport::nominal_evaluations)
      .def_readonly("binomial_sd", &EstimateReport::binomial_sd)
      .def_readonly("acceptance_rate", &EstimateReport::acceptance_rate)
      .def("product_of_factors", &EstimateReport::product_of_factors);

  m.def("crude_mc", [](const ReliabilityProblem& p, std::size_t m_samples, std::uint64_t seed) {
    Rng rng(seed);
    return crude_mc(p, m_samples, rng);
  }, py::arg("problem"), py::arg("m"), py::arg("seed"));

  m.def("classic_subsim", [](const ReliabilityProblem& p, std::size_t m_samples, double p0,
                             std::optional<std::vector<double>> proposal_sds, std::size_t sweeps, std::uint64_t seed) {
    SubsimConfig c;
    c.m = m_samples;
    c.p0 = p0;
    c.move = move_config(std::move(proposal_sds), sweeps);
    Rng rng(seed);
    return classic_subsim(p, c, rng);
  }, py::arg("problem"), py::arg("m") = 1000, py::arg("p0") = 0.1, py::arg("proposal_sds") = py::none(),
        py::arg("sweeps") = 1, py::arg("seed") = 0);

  m.def("bayesian_subsim", [](const ReliabilityProblem& p, std::size_t m_samples, double p0, std::size_t n0,
                              double eta_intermediate, double eta_final, std::size_t stage_budget,
                              std::optional<std::vector<double>> proposal_sds, std::size_t sweeps, std::uint64_t seed) {
    BssConfig c;
    c.m = m_samples;
    c.p0 = p0;
    c.n0 = n0;
    c.eta_intermediate = eta_intermediate;
    c.eta_final = eta_final;
    c.stage_budget = stage_budget;
    c.move = move_config(std::move(proposal_sds), sweeps);
    Rng rng(seed);
    return bayesian_subsim(p, c, rng);
  }, py::arg("problem"), py::arg("m") = 1000, py::arg("p0") = 0.1, py::arg("n0") = 10,
        py::arg("eta_intermediate") = 1e-6, py::arg("eta_final") = 1e-7, py::arg("stage_budget") = 100,
        py::arg("proposal_sds") = py::none(), py::arg("sweeps") = kBssDefaultSweeps, py::arg("seed") = 0);

  // bench-cli
  m.def("compute_stats", [](const std::vector<double>& estimates, std::optional<double> reference) {
    const ReplicationStats s = compute_stats(estimates, reference);
    py::dict d;
    d["replications"] = s.replications;
    d["mean"] = s.mean;
    d["sd"] = s.sd;
    d["reference"] = s.reference;
    d["kappa"] = s.kappa;
    d["cov"] = s.cov;
    d["cov_self"] = s.cov_self;
    return d;
  }, py::arg("estimates"), py::arg("reference") = py::none());
  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("index"));
  m.def("run_experiment_json", [](const std::string& config_text, std::size_t jobs, bool write_files) {
    const ExperimentConfig c = parse_config(config_text);
    ExperimentResult r;
    {
      py::gil_scoped_release release;
      r = run_experiment(c, RunOptions{jobs, LogLevel::kOff, write_files});
    }
    return summary_json(r);
  }, py::arg("config_text"), py::arg("jobs") = 0, py::arg("write_files") = false);
}
