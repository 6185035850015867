// Copyright 2026 The LVCM Workbench Authors
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

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lvcm {

/// Base class for every error raised by the workbench.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model violates a structural invariant (Hermiticity, positive frequencies, shape).
class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// Configuration text could not be parsed or validated. Carries the offending key and line.
class ParseError : public Error {
 public:
  ParseError(std::string key, int line, const std::string& what)
      : Error(format(key, line, what)), key_(std::move(key)), line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& key, int line, const std::string& what) {
    std::string msg = what;
    if (!key.empty()) msg += " (key '" + key + "'";
    if (line > 0) msg += (key.empty() ? " (" : ", ") + std::string("line ") + std::to_string(line);
    if (!key.empty() || line > 0) msg += ")";
    return msg;
  }

  std::string key_;
  int line_ = 0;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class LayoutMismatch : public Error {
 public:
  using Error::Error;
};

class DimensionLimitExceeded : public Error {
 public:
  using Error::Error;
};

/// Adaptive cutoff search did not converge. Holds the last two population iterates
/// (flattened time-major, one row per grid time) so callers can inspect the drift.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, std::vector<double> previous, std::vector<double> last)
      : Error(what), previous_(std::move(previous)), last_(std::move(last)) {}

  const std::vector<double>& previous_iterate() const { return previous_; }
  const std::vector<double>& last_iterate() const { return last_; }

 private:
  std::vector<double> previous_;
  std::vector<double> last_;
};

class IntegratorFailure : public Error {
 public:
  using Error::Error;
};

/// A compiled schedule needs a Rabi rate (or chain) the hardware cannot provide.
class InfeasibleSchedule : public Error {
 public:
  InfeasibleSchedule(std::string term, const std::string& what)
      : Error(what + " [term " + term + "]"), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

class UnsupportedChain : public Error {
 public:
  using Error::Error;
};

/// Density matrix lost trace or positivity beyond tolerance.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace lvcm
