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
#include <regex>
#include <string>

#include "lvcm/config/ini.hpp"
#include "lvcm/model.hpp"
#include "lvcm/units.hpp"

namespace lvcm::config {

/// Text for an energy stored internally in rad/fs. Files carry eV; when no eV
/// decimal maps back onto the exact same double, the key falls back to rad/fs.
struct EnergyText {
  std::string suffix;
  std::string value;
};

inline bool ev_round_trips(double ev, double w) {
  double parsed = 0.0;
  return parse_double(format_double(ev), parsed) && units::ev_to_rad_per_fs(parsed) == w;
}

inline std::optional<double> exact_ev(double w) {
  double ev = units::rad_per_fs_to_ev(w);
  if (ev_round_trips(ev, w)) return ev;
  double up = ev, down = ev;
  for (int i = 0; i < 8; ++i) {
    up = std::nextafter(up, INFINITY);
    down = std::nextafter(down, -INFINITY);
    if (ev_round_trips(up, w)) return up;
    if (ev_round_trips(down, w)) return down;
  }
  return std::nullopt;
}

inline void set_energy(IniWriter& w, const std::string& base, double value) {
  if (auto ev = exact_ev(value)) {
    w.set(base + "_ev", *ev);
  } else {
    w.set(base + "_rad_per_fs", value);
  }
}

inline void set_energy(IniWriter& w, const std::string& base, cplx value) {
  auto re = exact_ev(value.real());
  auto im = exact_ev(value.imag());
  if (re && im) {
    w.set(base + "_ev", cplx{*re, *im});
  } else {
    w.set(base + "_rad_per_fs", value);
  }
}

inline bool has_energy(const IniDocument& doc, const std::string& section, const std::string& base) {
  return doc.has(section, base + "_ev") || doc.has(section, base + "_rad_per_fs");
}

inline double get_energy(const IniDocument& doc, const std::string& section, const std::string& base) {
  const bool ev = doc.has(section, base + "_ev");
  const bool rad = doc.has(section, base + "_rad_per_fs");
  if (ev && rad) doc.fail(section, base + "_ev", "energy given in both eV and rad/fs");
  if (rad) return doc.get_double(section, base + "_rad_per_fs");
  return units::ev_to_rad_per_fs(doc.get_double(section, base + "_ev"));
}

inline double get_energy(const IniDocument& doc, const std::string& section, const std::string& base, double fallback) {
  return has_energy(doc, section, base) ? get_energy(doc, section, base) : fallback;
}

inline cplx get_complex_energy(const IniDocument& doc, const std::string& section, const std::string& base) {
  const bool ev = doc.has(section, base + "_ev");
  const bool rad = doc.has(section, base + "_rad_per_fs");
  if (ev && rad) doc.fail(section, base + "_ev", "energy given in both eV and rad/fs");
  if (rad) return doc.get_complex(section, base + "_rad_per_fs");
  const cplx v = doc.get_complex(section, base + "_ev");
  return {units::ev_to_rad_per_fs(v.real()), units::ev_to_rad_per_fs(v.imag())};
}

/// Writes [model], [modes] and (if present) [drive].
inline void write_model(IniWriter& w, const LvcmSpec& spec) {
  const std::size_t m = spec.states();
  w.section("model");
  w.set("states", m);
  if (!spec.labels().empty()) {
    std::string labels;
    for (std::size_t i = 0; i < m; ++i) labels += (i ? ", " : "") + spec.labels()[i];
    w.set("labels", labels);
  }
  for (std::size_t i = 0; i < m; ++i) set_energy(w, "energy_" + std::to_string(i), spec.delta(i, i).real());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (spec.delta(i, j) != cplx{}) set_energy(w, "coupling_" + std::to_string(i) + "_" + std::to_string(j), spec.delta(i, j));
    }
  }
  w.section("modes");
  w.set("count", spec.modes());
  for (std::size_t k = 0; k < spec.modes(); ++k) set_energy(w, "nu_" + std::to_string(k), spec.nu(k));
  for (std::size_t k = 0; k < spec.modes(); ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) {
        const cplx v = spec.kappa(i, j, k);
        if (v == cplx{}) continue;
        const std::string base = "kappa_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k);
        if (i == j) {
          set_energy(w, base, v.real());
        } else {
          set_energy(w, base, v);
        }
      }
    }
  }
  if (const auto& d = spec.drive()) {
    w.section("drive");
    w.set("transitions", d->transitions.size());
    for (std::size_t n = 0; n < d->transitions.size(); ++n) {
      const auto& tr = d->transitions[n];
      w.set("transition_" + std::to_string(n), std::to_string(tr.lower) + ", " + std::to_string(tr.upper) + ", " +
                                                     format_double(tr.dipole[0]) + ", " + format_double(tr.dipole[1]));
    }
    w.set_list("polarization", std::vector<double>{d->polarization[0].real(), d->polarization[0].imag(),
                                                   d->polarization[1].real(), d->polarization[1].imag()});
    set_energy(w, "amplitude", d->amplitude);
    set_energy(w, "carrier", d->carrier);
    w.set("envelope", d->envelope == Envelope::constant ? "constant" : "gaussian");
    w.set("center_fs", d->center_fs);
    w.set("width_fs", d->width_fs);
    w.set("rwa", d->rwa);
  }
}

inline std::string model_to_ini(const LvcmSpec& spec) {
  IniWriter w;
  write_model(w, spec);
  return w.str();
}

namespace detail {
inline void check_model_keys(const IniDocument& doc, std::size_t m, std::size_t n) {
  const std::string energy = "(_ev|_rad_per_fs)";
  const std::regex model_key("states|labels|name|energy_\\d+" + energy + "|coupling_\\d+_\\d+" + energy);
  const std::regex mode_key("count|nu_\\d+" + energy + "|kappa_\\d+_\\d+_\\d+" + energy);
  const std::regex drive_key("transitions|transition_\\d+|polarization|amplitude" + energy + "|carrier" + energy +
                             "|envelope|center_fs|width_fs|rwa");
  const std::regex index("\\d+");
  auto check = [&](const std::string& section, const std::regex& pattern) {
    for (const auto& k : doc.keys(section)) {
      if (!std::regex_match(k, pattern)) doc.fail(section, k, "unknown key");
      for (std::sregex_iterator it(k.begin(), k.end(), index), end; it != end; ++it) {
        const auto v = std::stoull(it->str());
        const bool mode_index = section == "modes" && k.rfind("kappa_", 0) == 0 && std::next(it) == end;
        const bool nu_index = section == "modes" && k.rfind("nu_", 0) == 0;
        const std::size_t bound = (mode_index || nu_index) ? n : m;
        if (section == "drive") break;
        if (v >= bound) doc.fail(section, k, "index out of range");
      }
    }
  };
  check("model", model_key);
  check("modes", mode_key);
  if (doc.has_section("drive")) check("drive", drive_key);
}
}  // namespace detail

/// Reads an explicit model from [model], [modes] and optional [drive].
inline LvcmSpec read_model(const IniDocument& doc) {
  const long long states = doc.get_int("model", "states");
  if (states < 1) doc.fail("model", "states", "must be at least 1");
  const auto m = static_cast<std::size_t>(states);
  const long long count = doc.has_section("modes") ? doc.get_int("modes", "count", 0) : 0;
  if (count < 0) doc.fail("modes", "count", "must be non-negative");
  const auto n = static_cast<std::size_t>(count);
  detail::check_model_keys(doc, m, n);

  std::vector<std::string> labels;
  if (doc.has("model", "labels")) {
    labels = split(doc.get_string("model", "labels"));
    if (labels.size() != m) doc.fail("model", "labels", "label count does not match states");
  }
  CMatrix delta = CMatrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) delta(i, i) = get_energy(doc, "model", "energy_" + std::to_string(i), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::string base = "coupling_" + std::to_string(i) + "_" + std::to_string(j);
      if (!has_energy(doc, "model", base)) continue;
      if (j <= i) doc.fail("model", base + "_ev", "couplings are given for i < j only");
      delta(i, j) = get_complex_energy(doc, "model", base);
      delta(j, i) = std::conj(delta(i, j));
    }
  }
  std::vector<double> nu(n);
  std::vector<CMatrix> kappa(n, CMatrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)));
  for (std::size_t k = 0; k < n; ++k) {
    nu[k] = get_energy(doc, "modes", "nu_" + std::to_string(k));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const std::string base = "kappa_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k);
        if (!has_energy(doc, "modes", base)) continue;
        if (j < i) doc.fail("modes", base + "_ev", "couplings are given for i <= j only");
        if (i == j) {
          kappa[k](i, i) = get_energy(doc, "modes", base);
        } else {
          kappa[k](i, j) = get_complex_energy(doc, "modes", base);
          kappa[k](j, i) = std::conj(kappa[k](i, j));
        }
      }
    }
  }
  std::optional<DriveSpec> drive;
  if (doc.has_section("drive")) {
    DriveSpec d;
    const long long nt = doc.get_int("drive", "transitions");
    for (long long t = 0; t < nt; ++t) {
      const std::string key = "transition_" + std::to_string(t);
      const auto v = doc.get_doubles("drive", key);
      if (v.size() != 4 || v[0] < 0 || v[1] < 0 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]))
        doc.fail("drive", key, "expected `lower, upper, mu_x, mu_y`");
      d.transitions.push_back({static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), {v[2], v[3]}});
    }
    const auto pol = doc.get_doubles("drive", "polarization");
    if (pol.size() != 4) doc.fail("drive", "polarization", "expected `re_x, im_x, re_y, im_y`");
    d.polarization = {cplx{pol[0], pol[1]}, cplx{pol[2], pol[3]}};
    d.amplitude = get_energy(doc, "drive", "amplitude");
    d.carrier = get_energy(doc, "drive", "carrier", 0.0);
    const std::string env = doc.get_string("drive", "envelope", "constant");
    if (env == "constant") {
      d.envelope = Envelope::constant;
    } else if (env == "gaussian") {
      d.envelope = Envelope::gaussian;
    } else {
      doc.fail("drive", "envelope", "expected constant or gaussian");
    }
    d.center_fs = doc.get_double("drive", "center_fs", 0.0);
    d.width_fs = doc.get_double("drive", "width_fs", 1.0);
    d.rwa = doc.get_bool("drive", "rwa", true);
    drive = d;
  }
  try {
    return LvcmSpec::create(std::move(delta), std::move(kappa), std::move(nu), std::move(drive), std::move(labels));
  } catch (const InvalidModel& e) {
    doc.fail("model", "states", e.what());
  }
}

}  // namespace lvcm::config
