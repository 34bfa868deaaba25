/*
 * Copyright 2026 The csgp-hedge Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CSGP_ERRORS_HPP_
#define CSGP_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace csgp {

/// Root of the library's exception hierarchy. The CLI maps each branch to an
/// exit code (config 2, data 3, numerical 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration or invalid construction arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incomplete input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// One or more hours could not be formed from the raw readings.
class GapError : public DataError {
 public:
  GapError(const std::string &what, std::vector<std::string> timestamps)
      : DataError(what), timestamps_(std::move(timestamps)) {}

  const std::vector<std::string> &timestamps() const { return timestamps_; }

 private:
  std::vector<std::string> timestamps_;
};

/// Mean/SD statistics are undefined (empty set or zero variance).
class DegenerateStatsError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Every restart of a hyperparameter fit failed.
class FitError : public NumericalError {
 public:
  FitError(const std::string &what, std::vector<std::string> diagnostics)
      : NumericalError(what), diagnostics_(std::move(diagnostics)) {}

  const std::vector<std::string> &diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

/// An operation was invoked on an object in the wrong state
/// (e.g. sampling from a model that has not been fitted).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace csgp

#endif  // CSGP_ERRORS_HPP_
