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
#include <string>
#include <vector>

#include "lvcm/errors.hpp"
#include "lvcm/model.hpp"
#include "lvcm/units.hpp"

namespace lvcm::presets {

using units::ev_to_rad_per_fs;

struct PresetArgs {
  double lambda_over_delta = 1.0;
  std::size_t modes = 2;
};

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> n{"toy", "ci", "vaet", "plet"};
  return n;
}

/// Symmetric conical intersection, illustrative couplings.
inline LvcmSpec ci() {
  return build_ci_model(ev_to_rad_per_fs(0.02), ev_to_rad_per_fs(0.02), ev_to_rad_per_fs(0.08), ev_to_rad_per_fs(0.08));
}

/// Three-mode vibrationally assisted transfer: donor-acceptor gap resonant with
/// mode 2, which couples anti-correlated to both states. Illustrative values.
inline LvcmSpec vaet() {
  return build_vaet_model(0.0, ev_to_rad_per_fs(-0.08), ev_to_rad_per_fs(0.01), ev_to_rad_per_fs(0.01),
                          ev_to_rad_per_fs(0.02), ev_to_rad_per_fs(-0.02), ev_to_rad_per_fs(0.01),
                          {ev_to_rad_per_fs(0.06), ev_to_rad_per_fs(0.08), ev_to_rad_per_fs(0.10)});
}

/// Polarization-driven transfer G -> {D1, D2} -> A under a circularly polarized
/// Gaussian pulse. Illustrative values; V2 = i V1 makes left and right
/// circular light distinguishable.
inline LvcmSpec plet(bool left_circular = true) {
  DriveSpec d;
  const double s = 1.0 / std::sqrt(2.0);
  d.polarization = {cplx{s, 0.0}, cplx{0.0, left_circular ? s : -s}};
  d.amplitude = ev_to_rad_per_fs(0.01);
  d.carrier = ev_to_rad_per_fs(2.0);
  d.envelope = Envelope::gaussian;
  d.center_fs = 100.0;
  d.width_fs = 30.0;
  d.rwa = true;
  return build_plet_model({0.0, ev_to_rad_per_fs(2.0), ev_to_rad_per_fs(2.05), ev_to_rad_per_fs(1.95)}, {1.0, 0.0},
                          {0.0, 1.0}, cplx{ev_to_rad_per_fs(0.02), 0.0}, cplx{0.0, ev_to_rad_per_fs(0.02)}, d);
}

inline LvcmSpec build(const std::string& name, const PresetArgs& args = {}) {
  if (name == "toy") return build_toy_model(args.modes, args.lambda_over_delta);
  if (name == "ci") return ci();
  if (name == "vaet") return vaet();
  if (name == "plet") return plet(true);
  if (name == "plet_right") return plet(false);
  throw Error("unknown preset " + name);
}

}  // namespace lvcm::presets
