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

#include <cmath>
#include <map>
#include <set>
#include <string>

#include "lvcm/config/ini.hpp"
#include "lvcm/errors.hpp"

namespace lvcm {

/// Trapped-ion hardware description. Defaults follow the published
/// 171Yb+ table; lab times are in microseconds unless the name says otherwise.
struct HardwareParams {
  // Radial mode frequency bands f/2pi (MHz), one per transverse direction.
  double radial_x_low_mhz = 1.80;
  double radial_x_high_mhz = 1.98;
  double radial_y_low_mhz = 2.45;
  double radial_y_high_mhz = 2.58;

  double sideband_rabi_min_khz = 1.47;
  double sideband_rabi_max_khz = 4.95;

  double motional_coherence_ms = 36.0;
  double heating_quanta_per_s = 5.0;
  double laser_coherence_ms = 496.0;

  double cooling_ms = 4.0;
  double state_prep_us = 100.0;
  double measurement_us = 150.0;

  /// Mean sdf pulse duration per chain size, matched on the reference toy model.
  std::map<std::size_t, double> average_sdf_duration_us{{2, 15.7}, {3, 17.4}, {4, 19.0}};
  double calibration_lambda_over_delta = 30.0;
  std::size_t calibration_steps = 600;
  double calibration_tau_fs = 400.0;

  double carrier_pi_time_us = 5.0;
  double sdf_min_duration_us = 4.0;
  double ms_us_per_rad = 600.0;
  double ms_min_duration_us = 25.0;
  double ms_loops = 1.0;

  double overhead_us() const { return cooling_ms * 1e3 + state_prep_us + measurement_us; }

  void validate() const {
    const double positive[] = {radial_x_low_mhz, radial_x_high_mhz, radial_y_low_mhz, radial_y_high_mhz,
                               sideband_rabi_min_khz, sideband_rabi_max_khz, motional_coherence_ms,
                               heating_quanta_per_s, laser_coherence_ms, cooling_ms, state_prep_us, measurement_us,
                               carrier_pi_time_us, ms_us_per_rad, ms_loops, calibration_lambda_over_delta,
                               calibration_tau_fs};
    for (double v : positive) {
      if (!(v > 0.0) || !std::isfinite(v)) throw Error("hardware parameters must be positive and finite");
    }
    if (sdf_min_duration_us < 0.0 || ms_min_duration_us < 0.0) throw Error("duration floors must be non-negative");
    if (calibration_steps < 1) throw Error("calibration step count must be positive");
    if (average_sdf_duration_us.empty()) throw Error("calibration table is empty");
    for (const auto& [n, d] : average_sdf_duration_us) {
      if (n < 2 || !(d > 0.0)) throw Error("calibration entries need >= 2 ions and positive durations");
    }
  }

  friend bool operator==(const HardwareParams&, const HardwareParams&) = default;
};

inline HardwareParams read_hardware(const config::IniDocument& doc, HardwareParams hw = {}) {
  const std::string s = "hardware";
  if (!doc.has_section(s)) return hw;
  std::set<std::string> known;
  auto num = [&](const char* key, double& field) {
    known.insert(key);
    field = doc.get_double(s, key, field);
  };
  num("radial_x_low_mhz", hw.radial_x_low_mhz);
  num("radial_x_high_mhz", hw.radial_x_high_mhz);
  num("radial_y_low_mhz", hw.radial_y_low_mhz);
  num("radial_y_high_mhz", hw.radial_y_high_mhz);
  num("sideband_rabi_min_khz", hw.sideband_rabi_min_khz);
  num("sideband_rabi_max_khz", hw.sideband_rabi_max_khz);
  num("motional_coherence_ms", hw.motional_coherence_ms);
  num("heating_quanta_per_s", hw.heating_quanta_per_s);
  num("laser_coherence_ms", hw.laser_coherence_ms);
  num("cooling_ms", hw.cooling_ms);
  num("state_prep_us", hw.state_prep_us);
  num("measurement_us", hw.measurement_us);
  num("calibration_lambda_over_delta", hw.calibration_lambda_over_delta);
  num("calibration_tau_fs", hw.calibration_tau_fs);
  num("carrier_pi_time_us", hw.carrier_pi_time_us);
  num("sdf_min_duration_us", hw.sdf_min_duration_us);
  num("ms_us_per_rad", hw.ms_us_per_rad);
  num("ms_min_duration_us", hw.ms_min_duration_us);
  num("ms_loops", hw.ms_loops);
  known.insert("calibration_steps");
  hw.calibration_steps = static_cast<std::size_t>(doc.get_int(s, "calibration_steps", static_cast<long long>(hw.calibration_steps)));
  known.insert("calibration_ions");
  known.insert("calibration_sdf_duration_us");
  if (doc.has(s, "calibration_ions") || doc.has(s, "calibration_sdf_duration_us")) {
    const auto ions = doc.get_ints(s, "calibration_ions");
    const auto durations = doc.get_doubles(s, "calibration_sdf_duration_us");
    if (ions.size() != durations.size()) doc.fail(s, "calibration_sdf_duration_us", "length differs from calibration_ions");
    hw.average_sdf_duration_us.clear();
    for (std::size_t i = 0; i < ions.size(); ++i) {
      if (ions[i] < 2) doc.fail(s, "calibration_ions", "chains need at least 2 ions");
      hw.average_sdf_duration_us[static_cast<std::size_t>(ions[i])] = durations[i];
    }
  }
  doc.require_known(s, known);
  try {
    hw.validate();
  } catch (const Error& e) {
    doc.fail(s, "", e.what());
  }
  return hw;
}

inline void write_hardware(config::IniWriter& w, const HardwareParams& hw) {
  w.section("hardware");
  w.set("radial_x_low_mhz", hw.radial_x_low_mhz);
  w.set("radial_x_high_mhz", hw.radial_x_high_mhz);
  w.set("radial_y_low_mhz", hw.radial_y_low_mhz);
  w.set("radial_y_high_mhz", hw.radial_y_high_mhz);
  w.set("sideband_rabi_min_khz", hw.sideband_rabi_min_khz);
  w.set("sideband_rabi_max_khz", hw.sideband_rabi_max_khz);
  w.set("motional_coherence_ms", hw.motional_coherence_ms);
  w.set("heating_quanta_per_s", hw.heating_quanta_per_s);
  w.set("laser_coherence_ms", hw.laser_coherence_ms);
  w.set("cooling_ms", hw.cooling_ms);
  w.set("state_prep_us", hw.state_prep_us);
  w.set("measurement_us", hw.measurement_us);
  std::vector<std::size_t> ions;
  std::vector<double> durations;
  for (const auto& [n, d] : hw.average_sdf_duration_us) {
    ions.push_back(n);
    durations.push_back(d);
  }
  w.set_list("calibration_ions", ions);
  w.set_list("calibration_sdf_duration_us", durations);
  w.set("calibration_lambda_over_delta", hw.calibration_lambda_over_delta);
  w.set("calibration_steps", hw.calibration_steps);
  w.set("calibration_tau_fs", hw.calibration_tau_fs);
  w.set("carrier_pi_time_us", hw.carrier_pi_time_us);
  w.set("sdf_min_duration_us", hw.sdf_min_duration_us);
  w.set("ms_us_per_rad", hw.ms_us_per_rad);
  w.set("ms_min_duration_us", hw.ms_min_duration_us);
  w.set("ms_loops", hw.ms_loops);
}

inline HardwareParams load_hardware(const std::string& path) { return read_hardware(config::IniDocument::load(path)); }

}  // namespace lvcm
