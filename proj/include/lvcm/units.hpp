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

// Internal unit system: energies are angular frequencies in rad/fs, simulated
// time is in fs, hardware schedules use lab time in microseconds.

namespace lvcm::units {

/// Reduced Planck constant in eV*fs (CODATA 2018).
inline constexpr double kHbarEvFs = 0.6582119569;

enum class EnergyUnit { eV, rad_per_fs };

struct EnergyQuantity {
  double value = 0.0;
  EnergyUnit unit = EnergyUnit::eV;
};

constexpr double ev_to_rad_per_fs(double ev) { return ev / kHbarEvFs; }
constexpr double rad_per_fs_to_ev(double w) { return w * kHbarEvFs; }

constexpr double to_angular_frequency(EnergyQuantity e) {
  return e.unit == EnergyUnit::eV ? ev_to_rad_per_fs(e.value) : e.value;
}

constexpr double to_ev(EnergyQuantity e) {
  return e.unit == EnergyUnit::rad_per_fs ? rad_per_fs_to_ev(e.value) : e.value;
}

constexpr EnergyQuantity to_rad_per_fs(EnergyQuantity e) {
  return {to_angular_frequency(e), EnergyUnit::rad_per_fs};
}

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Frequency f/2pi in kHz -> angular rate in rad/us.
constexpr double khz_to_rad_per_us(double khz) { return kTwoPi * khz * 1e-3; }
constexpr double rad_per_us_to_khz(double w) { return w / kTwoPi * 1e3; }

}  // namespace lvcm::units
