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

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "lvcm/config/ini.hpp"
#include "lvcm/errors.hpp"
#include "lvcm/hardware.hpp"
#include "lvcm/ion_emulator.hpp"
#include "lvcm/model.hpp"
#include "lvcm/pulse_compiler.hpp"

namespace lvcm::estimator {

struct ExperimentPlan {
  std::vector<double> lambda_over_delta{1.0, 5.0, 10.0, 20.0, 30.0};
  std::vector<std::size_t> modes{2, 3, 4, 5};
  std::size_t points = 40;
  std::size_t runs = 100;
  HardwareParams hardware;
  compiler::CompileOptions compile;
};

struct EstimateRow {
  double lambda_over_delta = 0.0;
  std::size_t modes = 0;
  std::size_t runs = 0;
  double total_s = 0.0;
  double overhead_s = 0.0;
  double operation_s = 0.0;
  /// Operation time of the longest run (all S steps), in ms.
  double run_operation_ms = 0.0;
};

/// Stop steps round(j S / S') for j = 1 .. S'.
inline std::vector<std::size_t> measurement_steps(std::size_t steps, std::size_t points) {
  std::vector<std::size_t> out(points);
  for (std::size_t j = 1; j <= points; ++j) {
    out[j - 1] = static_cast<std::size_t>(std::llround(static_cast<double>(j) * static_cast<double>(steps) / static_cast<double>(points)));
  }
  return out;
}

/// R x (overhead + operation time until s) summed over the S' stops.
inline EstimateRow estimate_schedule(const compiler::PulseSchedule& sch, std::size_t points, std::size_t runs) {
  if (points < 1 || runs < 1) throw Error("time points and runs must be at least 1");
  EstimateRow row;
  row.runs = runs;
  row.modes = sch.modes;
  const double r = static_cast<double>(runs);
  double op = 0.0;
  for (std::size_t s : measurement_steps(sch.steps(), points)) op += compiler::operation_time_until(sch, s);
  row.operation_s = r * op * 1e-6;
  row.overhead_s = r * static_cast<double>(points) * sch.overhead_us() * 1e-6;
  row.total_s = row.operation_s + row.overhead_s;
  row.run_operation_ms = compiler::operation_time_us(sch) * 1e-3;
  return row;
}

inline std::vector<EstimateRow> experimental_time(const ExperimentPlan& plan) {
  if (plan.lambda_over_delta.empty() || plan.modes.empty()) throw Error("experiment grid is empty");
  std::vector<EstimateRow> out;
  for (std::size_t n : plan.modes) {
    for (double lam : plan.lambda_over_delta) {
      const auto sch = compiler::build_schedule(build_toy_model(n, lam), plan.hardware, plan.compile);
      EstimateRow row = estimate_schedule(sch, plan.points, plan.runs);
      row.lambda_over_delta = lam;
      out.push_back(row);
    }
  }
  return out;
}

/// Overhead-only baseline: R S' runs of cooling, preparation and measurement.
inline double overhead_baseline_s(const HardwareParams& hw, std::size_t points, std::size_t runs) {
  return static_cast<double>(runs) * static_cast<double>(points) * hw.overhead_us() * 1e-6;
}

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// max |residual| / (max y - min y); 0 for a constant table.
  double residual = 0.0;
};

/// Least-squares line of y against sqrt(lambda/Delta).
inline ScalingFit scaling_fit(const std::vector<double>& lambda_over_delta, const std::vector<double>& y) {
  if (lambda_over_delta.size() != y.size()) throw Error("fit inputs differ in length");
  if (y.size() < 3) throw Error("scaling fit needs at least three lambda values");
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = std::sqrt(lambda_over_delta[static_cast<std::size_t>(i)]);
    a(i, 1) = 1.0;
    b(i) = y[static_cast<std::size_t>(i)];
  }
  if ((a.col(0).array() - a(0, 0)).abs().maxCoeff() == 0.0) throw Error("scaling fit needs distinct lambda values");
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  ScalingFit fit{c(0), c(1), 0.0};
  const double range = b.maxCoeff() - b.minCoeff();
  if (range > 0) fit.residual = (a * c - b).cwiseAbs().maxCoeff() / range;
  return fit;
}

/// Fit of the operation-time component (total minus overhead baseline) at fixed N.
inline ScalingFit scaling_fit(const std::vector<EstimateRow>& rows) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    x.push_back(r.lambda_over_delta);
    y.push_back(r.total_s - r.overhead_s);
  }
  return scaling_fit(x, y);
}

inline std::string estimate_to_csv(const std::vector<EstimateRow>& rows) {
  using config::format_double;
  std::string out = "lambda_over_delta,N,R,total_s,overhead_s,operation_s,run_operation_ms\n";
  for (const auto& r : rows) {
    out += format_double(r.lambda_over_delta) + "," + std::to_string(r.modes) + "," + std::to_string(r.runs) + "," +
           format_double(r.total_s) + "," + format_double(r.overhead_s) + "," + format_double(r.operation_s) + "," +
           format_double(r.run_operation_ms) + "\n";
  }
  return out;
}

}  // namespace lvcm::estimator
