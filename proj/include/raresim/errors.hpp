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

#ifndef RARESIM_ERRORS_HPP
#define RARESIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace raresim {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments violate a documented precondition (bad dimension, non-finite coordinate, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// The performance function produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Hyperparameter estimation or covariance factorization failed.
class FittingError : public Error {
 public:
  using Error::Error;
};

/// The kriging system could not be solved at prediction time.
class PredictionError : public Error {
 public:
  using Error::Error;
};

/// A new observation coincides with an existing design point.
class DuplicatePointError : public Error {
 public:
  using Error::Error;
};

/// Every candidate duplicates an existing design point.
class NoSelectablePointError : public Error {
 public:
  using Error::Error;
};

/// All importance ratios vanished; the next stage has no support.
class DegeneratePopulationError : public Error {
 public:
  using Error::Error;
};

/// The surrogate cannot produce a usable threshold.
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace raresim

#endif  // RARESIM_ERRORS_HPP
