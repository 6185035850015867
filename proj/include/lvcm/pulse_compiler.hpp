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
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lvcm/config/ini.hpp"
#include "lvcm/errors.hpp"
#include "lvcm/hardware.hpp"
#include "lvcm/model.hpp"
#include "lvcm/spin.hpp"

namespace lvcm::compiler {

using spin::Mat3;
using spin::SU2;
using spin::Vec3;

enum class Encoding { automatic, compact, one_hot };
enum class TermKind { energy, diagonal_coupling, off_diagonal, off_diagonal_coupling };
enum class TermOrder { canonical, reversed };

inline std::string to_string(Encoding e) {
  switch (e) {
    case Encoding::compact: return "compact";
    case Encoding::one_hot: return "one_hot";
    default: return "automatic";
  }
}

inline Encoding parse_encoding(const std::string& s) {
  if (s == "compact") return Encoding::compact;
  if (s == "one_hot") return Encoding::one_hot;
  if (s == "automatic" || s == "auto") return Encoding::automatic;
  throw Error("unknown encoding " + s);
}

inline std::string to_string(TermOrder o) { return o == TermOrder::canonical ? "canonical" : "reversed"; }

inline TermOrder parse_order(const std::string& s) {
  if (s == "canonical") return TermOrder::canonical;
  if (s == "reversed") return TermOrder::reversed;
  throw Error("unknown term order " + s);
}

/// One model-level term of a Trotter step; angle = coefficient * tau / S.
struct TrotterTerm {
  TermKind kind = TermKind::energy;
  std::size_t step = 0;
  std::size_t i = 0, j = 0, k = 0;
  cplx coefficient{};
  cplx angle{};
  bool driven = false;

  std::string name() const {
    const auto s = [](std::size_t v) { return std::to_string(v); };
    switch (kind) {
      case TermKind::energy: return "energy_" + s(i);
      case TermKind::diagonal_coupling: return "kappa_" + s(i) + "_" + s(i) + "_" + s(k);
      case TermKind::off_diagonal: return (driven ? "drive_" : "delta_") + s(i) + "_" + s(j);
      default: return "kappa_" + s(i) + "_" + s(j) + "_" + s(k);
    }
  }
};

/// Electronic block without the field: delta plus rotating-frame shifts.
inline CMatrix static_electronic(const LvcmSpec& spec) {
  CMatrix h = spec.delta();
  if (spec.drive() && spec.drive()->rwa) {
    const auto lower = spec.rwa_lower_states();
    for (std::size_t i = 0; i < spec.states(); ++i) {
      if (!lower[i]) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) -= spec.drive()->carrier;
    }
  }
  return h;
}

inline double step_midpoint(std::size_t step, double dt) { return (static_cast<double>(step) - 0.5) * dt; }

/// Terms of Trotter step `step` (1-based); the drive is sampled at the step midpoint.
inline std::vector<TrotterTerm> trotter_step(const LvcmSpec& spec, std::size_t step, double dt,
                                             TermOrder order = TermOrder::canonical) {
  const std::size_t m = spec.states(), n = spec.modes();
  const double tm = step_midpoint(step, dt);
  const CMatrix h = spec.electronic_hamiltonian(tm);
  std::vector<bool> driven(m * m, false);
  if (spec.drive()) {
    for (const auto& tr : spec.drive()->transitions) {
      driven[std::min(tr.lower, tr.upper) * m + std::max(tr.lower, tr.upper)] = true;
    }
  }
  std::vector<TrotterTerm> out;
  auto push = [&](TermKind kind, std::size_t i, std::size_t j, std::size_t k, cplx c, bool drv) {
    if (c == cplx{}) return;
    out.push_back({kind, step, i, j, k, c, c * dt, drv});
  };
  for (std::size_t i = 0; i < m; ++i) push(TermKind::energy, i, i, 0, h(i, i).real(), false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) push(TermKind::diagonal_coupling, i, i, k, spec.kappa(i, i, k).real(), false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) push(TermKind::off_diagonal, i, j, 0, h(i, j), driven[i * m + j]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t k = 0; k < n; ++k) push(TermKind::off_diagonal_coupling, i, j, k, spec.kappa(i, j, k), false);
  if (order == TermOrder::reversed) std::reverse(out.begin(), out.end());
  return out;
}

inline std::vector<TrotterTerm> trotterize(const LvcmSpec& spec, double tau_fs, std::size_t steps,
                                           TermOrder order = TermOrder::canonical) {
  if (steps < 1) throw Error("Trotter step count must be at least 1");
  const double dt = tau_fs / static_cast<double>(steps);
  std::vector<TrotterTerm> out;
  for (std::size_t s = 1; s <= steps; ++s) {
    auto t = trotter_step(spec, s, dt, order);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Qubit encoding

/// Register layout plus the static single-qubit generator H0 removed by the
/// interaction picture (together with sum_k nu_k a_k^dag a_k).
struct Register {
  Encoding encoding = Encoding::compact;
  std::size_t qubits = 0;
  std::optional<std::size_t> ancilla;
  std::vector<Vec3> h0;
  /// Electronic state i is read out as qubit measurement[i].first == measurement[i].second.
  std::vector<std::pair<std::size_t, int>> measurement;
  std::vector<Vec3> initial_bloch;

  std::size_t total_qubits() const { return qubits + (ancilla ? 1 : 0); }
};

inline Encoding resolve_encoding(const LvcmSpec& spec, Encoding requested) {
  const bool compact_ok = spec.states() == 2 && !spec.drive();
  if (requested == Encoding::automatic) return compact_ok ? Encoding::compact : Encoding::one_hot;
  if (requested == Encoding::compact && !compact_ok) {
    throw InvalidModel("compact encoding needs exactly two undriven electronic states");
  }
  return requested;
}

inline Register make_register(const LvcmSpec& spec, Encoding requested, std::size_t initial_state) {
  if (spec.states() < 2) throw InvalidModel("at least two electronic states are needed to map onto qubits");
  if (initial_state >= spec.states()) throw IndexOutOfRange("initial electronic state out of range");
  Register r;
  r.encoding = resolve_encoding(spec, requested);
  const CMatrix h = static_electronic(spec);
  bool displacement = false;
  if (r.encoding == Encoding::compact) {
    r.qubits = 1;
    r.h0.push_back({h(0, 1).real(), -h(0, 1).imag(), 0.5 * (h(0, 0).real() - h(1, 1).real())});
    r.measurement = {{0, 0}, {0, 1}};
    r.initial_bloch.push_back(initial_state == 0 ? Vec3::UnitZ() : Vec3(-Vec3::UnitZ()));
    for (std::size_t k = 0; k < spec.modes(); ++k) displacement |= (spec.kappa(0, 0, k) + spec.kappa(1, 1, k)) != cplx{};
  } else {
    r.qubits = spec.states();
    for (std::size_t i = 0; i < r.qubits; ++i) {
      r.h0.push_back({0.0, 0.0, -0.5 * h(i, i).real()});
      r.measurement.emplace_back(i, 1);
      r.initial_bloch.push_back(i == initial_state ? Vec3(-Vec3::UnitZ()) : Vec3::UnitZ());
      for (std::size_t k = 0; k < spec.modes(); ++k) displacement |= spec.kappa(i, i, k) != cplx{};
    }
  }
  if (displacement) {
    r.ancilla = r.qubits;
    r.h0.push_back(Vec3::Zero());
    r.initial_bloch.push_back(Vec3::UnitX());
  }
  return r;
}

/// Qubit-level generator piece. `axis` / `coupling` carry angle units once a
/// step has been put in the interaction picture.
struct QubitTerm {
  enum class Kind { sdf, pair, triple };
  Kind kind = Kind::sdf;
  std::size_t q0 = 0, q1 = 0, mode = 0;
  Vec3 axis = Vec3::Zero();
  Mat3 coupling = Mat3::Zero();
  double phi_m = 0.0;
  std::string source;
};

/// Pauli coefficients C_ab of h sigma^-_i sigma^+_j + h.c. (sigma^- = |1><0|).
inline Mat3 exchange_coefficients(cplx h) {
  Eigen::Matrix2cd lower = Eigen::Matrix2cd::Zero(), raise = Eigen::Matrix2cd::Zero();
  lower(1, 0) = 1.0;
  raise(0, 1) = 1.0;
  auto kron = [](const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
    Eigen::Matrix4cd out;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) out.block<2, 2>(2 * r, 2 * c) = a(r, c) * b;
    return out;
  };
  Eigen::Matrix4cd o = h * kron(lower, raise);
  o += o.adjoint().eval();
  const std::array<PauliAxis, 3> ax{PauliAxis::X, PauliAxis::Y, PauliAxis::Z};
  Mat3 c;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      c(a, b) = 0.25 * (kron(pauli_matrix(ax[static_cast<std::size_t>(a)]), pauli_matrix(ax[static_cast<std::size_t>(b)])) * o)
                           .trace()
                           .real();
  return c;
}

/// Schrodinger-picture qubit terms for one step's ordered term list. Energies and
/// static couplings of the compact encoding live in H0 and emit nothing.
/// Consecutive diagonal couplings are merged per mode (they commute).
inline std::vector<QubitTerm> encode_step(const std::vector<TrotterTerm>& terms, const Register& reg, std::size_t modes) {
  std::vector<QubitTerm> out;
  std::vector<Vec3> z(modes, Vec3::Zero());
  std::vector<std::vector<double>> one_hot_z(modes, std::vector<double>(reg.qubits, 0.0));
  std::vector<double> shift(modes, 0.0);
  std::vector<bool> touched(modes, false);
  bool in_block = false;
  auto flush = [&] {
    if (!in_block) return;
    for (std::size_t k = 0; k < modes; ++k) {
      if (!touched[k]) continue;
      const std::string src = "kappa_diag_" + std::to_string(k);
      if (reg.encoding == Encoding::compact) {
        if (z[k].squaredNorm() > 0) out.push_back({QubitTerm::Kind::sdf, 0, 0, k, z[k], Mat3::Zero(), 0.0, src});
      } else {
        for (std::size_t q = 0; q < reg.qubits; ++q) {
          if (one_hot_z[k][q] != 0.0) {
            out.push_back({QubitTerm::Kind::sdf, q, q, k, Vec3(0, 0, one_hot_z[k][q]), Mat3::Zero(), 0.0,
                           "kappa_" + std::to_string(q) + "_" + std::to_string(q) + "_" + std::to_string(k)});
          }
        }
      }
      if (shift[k] != 0.0 && reg.ancilla) {
        out.push_back({QubitTerm::Kind::sdf, *reg.ancilla, *reg.ancilla, k, Vec3(shift[k], 0, 0), Mat3::Zero(), 0.0,
                       "displacement_" + std::to_string(k)});
      }
      z[k].setZero();
      std::fill(one_hot_z[k].begin(), one_hot_z[k].end(), 0.0);
      shift[k] = 0.0;
      touched[k] = false;
    }
    in_block = false;
  };
  for (const auto& t : terms) {
    if (t.kind != TermKind::diagonal_coupling) flush();
    switch (t.kind) {
      case TermKind::energy:
        break;
      case TermKind::diagonal_coupling: {
        in_block = true;
        touched[t.k] = true;
        const double c = t.coefficient.real();
        shift[t.k] += 0.5 * c;
        if (reg.encoding == Encoding::compact) {
          z[t.k].z() += t.i == 0 ? 0.5 * c : -0.5 * c;
        } else {
          one_hot_z[t.k][t.i] -= 0.5 * c;
        }
        break;
      }
      case TermKind::off_diagonal:
        if (reg.encoding == Encoding::one_hot) {
          out.push_back({QubitTerm::Kind::pair, t.i, t.j, 0, Vec3::Zero(), exchange_coefficients(t.coefficient), 0.0, t.name()});
        }
        break;
      case TermKind::off_diagonal_coupling:
        if (reg.encoding == Encoding::compact) {
          out.push_back({QubitTerm::Kind::sdf, 0, 0, t.k, Vec3(t.coefficient.real(), -t.coefficient.imag(), 0.0),
                         Mat3::Zero(), 0.0, t.name()});
        } else {
          out.push_back({QubitTerm::Kind::triple, t.i, t.j, t.k, Vec3::Zero(), exchange_coefficients(t.coefficient), 0.0,
                         t.name()});
        }
        break;
    }
  }
  flush();
  return out;
}

/// U0_q(t) = exp(-i t h0_q . sigma).
inline SU2 free_evolution(const Vec3& h0, double t) {
  const double n = h0.norm();
  if (n == 0.0) return SU2::Identity();
  return spin::rotation(h0 / n, 2.0 * n * t);
}

inline double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

/// Interaction-picture generator of step `step`, already multiplied by dt:
/// spin axes rotated by H0 at the step midpoint, mode factors a -> a e^{-i nu t_mid}
/// with amplitude weighted by sinc(nu dt / 2).
inline std::vector<QubitTerm> interaction_step(const LvcmSpec& spec, const Register& reg, std::size_t step, double dt,
                                               TermOrder order = TermOrder::canonical) {
  auto terms = encode_step(trotter_step(spec, step, dt, order), reg, spec.modes());
  const double tm = step_midpoint(step, dt);
  std::vector<Mat3> q(reg.total_qubits());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = spin::bloch_rotation(free_evolution(reg.h0[i], tm).adjoint());
  for (auto& t : terms) {
    double scale = dt;
    if (t.kind != QubitTerm::Kind::pair) {
      const double nu = spec.nu(t.mode);
      scale *= sinc(0.5 * nu * dt);
      t.phi_m = -nu * tm;
    }
    if (t.kind == QubitTerm::Kind::sdf) {
      t.axis = scale * (q[t.q0] * t.axis);
    } else {
      t.coupling = scale * (q[t.q0] * t.coupling * q[t.q1].transpose());
    }
  }
  return terms;
}

struct Component {
  double weight;
  Vec3 a, b;
};

/// sum_ab C_ab sigma_a sigma_b = sum_k s_k (u_k.sigma)(v_k.sigma); the pieces commute.
inline std::vector<Component> product_components(const Mat3& c, double tol = 1e-15) {
  Eigen::JacobiSVD<Mat3> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
  std::vector<Component> out;
  for (int k = 0; k < 3; ++k) {
    const double s = svd.singularValues()(k);
    if (s > tol) out.push_back({s, svd.matrixU().col(k), svd.matrixV().col(k)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Native pulses and durations

enum class PulseKind { carrier, sdf, ms };

inline std::string to_string(PulseKind k) {
  switch (k) {
    case PulseKind::carrier: return "carrier";
    case PulseKind::sdf: return "sdf";
    default: return "ms";
  }
}

/// carrier: exp(-i (angle/2) sigma^phi)
/// sdf:     exp(-i angle sigma^phi (a e^{i phi_m} + a^dag e^{-i phi_m}))
/// ms:      exp(-i angle sigma^phi0 sigma^phi1)
struct NativePulse {
  PulseKind kind = PulseKind::carrier;
  std::size_t step = 0;
  std::vector<std::size_t> qubits;
  std::optional<std::size_t> mode;
  std::vector<double> phi;
  double phi_m = 0.0;
  double angle = 0.0;
  double rabi_khz = 0.0;
  double duration_us = 0.0;
  std::string frame_tag;
  std::string term;
};

inline double wrap_phase(double phi) { return std::remainder(phi, 2.0 * std::numbers::pi); }

/// Non-CM radial mode frequencies (MHz), descending; the top mode of each
/// direction is the centre-of-mass mode and is left out.
inline std::vector<double> radial_mode_frequencies(const HardwareParams& hw, std::size_t ions) {
  std::vector<double> f;
  auto band = [&](double hi, double lo) {
    for (std::size_t i = 1; i < ions; ++i) f.push_back(hi - (hi - lo) * static_cast<double>(i) / static_cast<double>(ions - 1));
  };
  if (ions >= 2) {
    band(hw.radial_y_high_mhz, hw.radial_y_low_mhz);
    band(hw.radial_x_high_mhz, hw.radial_x_low_mhz);
  }
  std::sort(f.begin(), f.end(), std::greater<>());
  return f;
}

inline std::size_t chain_size(std::size_t modes, std::size_t qubits) {
  return std::max<std::size_t>((modes + 1) / 2 + 1, qubits);
}

/// Mode counts of the reference toy models that define the calibration of a chain size.
inline std::vector<std::size_t> calibration_mode_counts(std::size_t ions) {
  std::vector<std::size_t> out;
  for (std::size_t n = 2; n <= 5; ++n) {
    if (chain_size(n, 1) == ions) out.push_back(n);
  }
  if (out.empty()) out = {2 * ions - 3, 2 * ions - 2};
  return out;
}

/// sdf duration scale c (us/rad) such that the mean of max(c |theta|, floor) over
/// the reference toy schedules equals the tabulated average for `ions`.
inline double sdf_scale_us_per_rad(const HardwareParams& hw, std::size_t ions) {
  const auto it = hw.average_sdf_duration_us.find(ions);
  if (it == hw.average_sdf_duration_us.end()) {
    throw UnsupportedChain("no pulse-duration calibration for a " + std::to_string(ions) + "-ion chain");
  }
  const double target = it->second;
  if (hw.sdf_min_duration_us >= target) throw UnsupportedChain("sdf duration floor exceeds the calibration target");
  std::vector<double> theta;
  for (std::size_t n : calibration_mode_counts(ions)) {
    const LvcmSpec toy = build_toy_model(n, hw.calibration_lambda_over_delta);
    const Register reg = make_register(toy, Encoding::compact, 0);
    const double dt = hw.calibration_tau_fs / static_cast<double>(hw.calibration_steps);
    for (std::size_t s = 1; s <= hw.calibration_steps; ++s) {
      for (const auto& t : interaction_step(toy, reg, s, dt)) theta.push_back(t.axis.norm());
    }
  }
  auto mean_duration = [&](double c) {
    double sum = 0.0;
    for (double th : theta) sum += std::max(c * th, hw.sdf_min_duration_us);
    return sum / static_cast<double>(theta.size());
  };
  double lo = 0.0, hi = 1.0;
  while (mean_duration(hi) < target) hi *= 2.0;
  for (int it2 = 0; it2 < 200 && hi - lo > 1e-13 * hi; ++it2) {
    const double mid = 0.5 * (lo + hi);
    (mean_duration(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct DurationModel {
  HardwareParams hw;
  double sdf_us_per_rad = 0.0;

  double carrier_rabi_khz() const { return 1e3 / (2.0 * hw.carrier_pi_time_us); }
  double carrier(double angle) const { return std::abs(angle) / std::numbers::pi * hw.carrier_pi_time_us; }
  double sdf(double angle) const { return std::max(sdf_us_per_rad * std::abs(angle), hw.sdf_min_duration_us); }
  /// Sideband Rabi rate Omega/2pi (kHz) with Omega t / 2 = |angle|.
  double sdf_rabi_khz(double angle, double t) const { return 2.0 * std::abs(angle) / t / (2.0 * std::numbers::pi) * 1e3; }
  double ms(double angle) const { return std::max(hw.ms_us_per_rad * std::abs(angle), hw.ms_min_duration_us); }
  /// Rabi rate of a K-loop MS pulse: angle = Omega^2 t^2 / (4 pi K).
  double ms_rabi_khz(double angle, double t) const {
    return std::sqrt(4.0 * std::numbers::pi * hw.ms_loops * std::abs(angle)) / t / (2.0 * std::numbers::pi) * 1e3;
  }
};

// ---------------------------------------------------------------------------
// Schedule

struct CompileOptions {
  double tau_fs = 400.0;
  std::size_t steps = 600;
  Encoding encoding = Encoding::automatic;
  TermOrder order = TermOrder::canonical;
  bool physical_rotation = false;
  std::size_t initial_state = 0;
  double plane_tolerance = 1e-9;
};

struct PulseSchedule {
  CompileOptions options;
  double dt_fs = 0.0;
  Register reg;
  std::size_t states = 0;
  std::size_t modes = 0;
  std::vector<double> nu;
  std::size_t n_ions = 0;
  std::vector<double> mode_frequency_mhz;
  DurationModel durations;
  std::vector<NativePulse> prep;
  std::vector<NativePulse> pulses;
  /// Pulses of step s occupy [step_offsets[s-1], step_offsets[s]).
  std::vector<std::size_t> step_offsets;
  /// Per-qubit frames after step s (index 0: after preparation).
  std::vector<std::vector<SU2>> frames;
  std::vector<std::vector<std::size_t>> frame_ids;
  std::vector<std::vector<std::array<double, 4>>> frame_registry;
  /// Sum of prep and pulse durations through step s, accumulated in order.
  std::vector<double> cumulative_us;

  std::size_t steps() const { return options.steps; }
  double overhead_us() const { return durations.hw.overhead_us(); }
  std::size_t count(PulseKind kind) const {
    return static_cast<std::size_t>(std::count_if(pulses.begin(), pulses.end(), [&](const NativePulse& p) { return p.kind == kind; }));
  }
};

namespace detail {

class Lowerer {
 public:
  Lowerer(PulseSchedule& sch, std::vector<SU2> frames) : sch_(sch), g_(std::move(frames)) {
    ids_.assign(g_.size(), 0);
    sch_.frame_registry.assign(g_.size(), {});
    for (std::size_t q = 0; q < g_.size(); ++q) sch_.frame_registry[q].push_back(spin::quaternion(g_[q]));
  }

  const std::vector<SU2>& frames() const { return g_; }
  const std::vector<std::size_t>& ids() const { return ids_; }

  std::string tag(const std::string& role, std::initializer_list<std::size_t> qs) const {
    std::string s = role + "@";
    bool first = true;
    for (std::size_t q : qs) {
      if (!first) s += "+";
      s += "q" + std::to_string(q) + ".f" + std::to_string(ids_[q]);
      first = false;
    }
    return s;
  }

  /// Physical carrier rotating the Bloch sphere by `angle` about in-plane axis e.
  NativePulse carrier(std::size_t q, const Vec3& e, double angle, const std::string& role, std::size_t step,
                      const std::string& term) const {
    double phi = spin::axis_phase(e), a = angle;
    if (a < 0) {
      a = -a;
      phi += std::numbers::pi;
    }
    NativePulse p;
    p.kind = PulseKind::carrier;
    p.step = step;
    p.qubits = {q};
    p.phi = {wrap_phase(phi)};
    p.angle = a;
    p.rabi_khz = sch_.durations.carrier_rabi_khz();
    p.duration_us = sch_.durations.carrier(a);
    p.frame_tag = tag(role, {q});
    p.term = term;
    return p;
  }

  /// Unit physical in-plane axis realising interaction-picture axis n on qubit q,
  /// inserting a basis-change carrier when the frame leaves it out of plane.
  Vec3 physical_axis(std::size_t q, const Vec3& n, std::size_t step, const std::string& term) {
    Vec3 m = spin::bloch_rotation(g_[q]) * n.normalized();
    if (std::abs(m.z()) > sch_.options.plane_tolerance) {
      const Vec3 flat(m.x(), m.y(), 0.0);
      Vec3 e = flat.norm() < 1e-12 ? Vec3(Vec3::UnitX()) : Vec3(Vec3::UnitZ().cross(m).normalized());
      const double beta = 0.5 * std::numbers::pi - std::acos(std::clamp(m.z(), -1.0, 1.0));
      out().push_back(carrier(q, e, beta, "basis", step, term));
      update(q, spin::rotation(e, beta) * g_[q]);
      m = spin::bloch_rotation(g_[q]) * n.normalized();
    }
    m.z() = 0.0;
    return m.normalized();
  }

  void sdf(std::size_t q, const Vec3& n, double theta, std::size_t mode, double phi_m, const std::string& role,
           std::size_t step, const std::string& term) {
    if (theta < kMinAngle) return;
    const Vec3 m = physical_axis(q, n, step, term);
    NativePulse p;
    p.kind = PulseKind::sdf;
    p.step = step;
    p.qubits = {q};
    p.mode = mode;
    p.phi = {wrap_phase(spin::axis_phase(m))};
    p.phi_m = wrap_phase(phi_m);
    p.angle = theta;
    p.duration_us = sch_.durations.sdf(theta);
    p.rabi_khz = sch_.durations.sdf_rabi_khz(theta, p.duration_us);
    p.frame_tag = tag(role, {q});
    p.term = term;
    if (p.rabi_khz > sch_.durations.hw.sideband_rabi_max_khz) {
      throw InfeasibleSchedule(term, "sdf pulse needs " + config::format_double(p.rabi_khz) + " kHz sideband Rabi rate");
    }
    out().push_back(std::move(p));
  }

  void ms(std::size_t q0, const Vec3& a, std::size_t q1, const Vec3& b, double theta, const std::string& role,
          std::size_t step, const std::string& term) {
    if (std::abs(theta) < kMinAngle) return;
    const Vec3 m0 = physical_axis(q0, a, step, term);
    const Vec3 m1 = physical_axis(q1, b, step, term);
    double phi0 = spin::axis_phase(m0);
    if (theta < 0) {
      theta = -theta;
      phi0 += std::numbers::pi;
    }
    NativePulse p;
    p.kind = PulseKind::ms;
    p.step = step;
    p.qubits = {q0, q1};
    p.phi = {wrap_phase(phi0), wrap_phase(spin::axis_phase(m1))};
    p.angle = theta;
    p.duration_us = sch_.durations.ms(theta);
    p.rabi_khz = sch_.durations.ms_rabi_khz(theta, p.duration_us);
    p.frame_tag = tag(role, {q0, q1});
    p.term = term;
    if (p.rabi_khz > sch_.durations.hw.sideband_rabi_max_khz) {
      throw InfeasibleSchedule(term, "MS pulse needs " + config::format_double(p.rabi_khz) + " kHz Rabi rate");
    }
    out().push_back(std::move(p));
  }

  void lower(const QubitTerm& t, std::size_t step) {
    switch (t.kind) {
      case QubitTerm::Kind::sdf:
        sdf(t.q0, t.axis, t.axis.norm(), t.mode, t.phi_m, "step", step, t.source);
        break;
      case QubitTerm::Kind::pair: {
        static const char* roles[] = {"xx", "yy", "zz"};
        const auto parts = product_components(t.coupling);
        for (std::size_t c = 0; c < parts.size(); ++c) {
          ms(t.q0, parts[c].a, t.q1, parts[c].b, parts[c].weight, roles[c], step, t.source);
        }
        break;
      }
      case QubitTerm::Kind::triple:
        // exp(-i w (a.s_i)(b.s_j) F) = E^dag exp(-i w (r x a).s_i F) E, E = exp(-i pi/4 (r.s_i)(b.s_j)), r _|_ a.
        for (const auto& part : product_components(t.coupling)) {
          if (part.weight < kMinAngle) continue;
          const Vec3 zloc = spin::bloch_rotation(g_[t.q0]).transpose() * Vec3::UnitZ();
          Vec3 r = part.a.cross(zloc);
          r = r.norm() < 1e-9 ? spin::orthogonal(part.a) : Vec3(r.normalized());
          const Vec3 w = r.cross(part.a);
          ms(t.q0, r, t.q1, part.b, 0.25 * std::numbers::pi, "entangle", step, t.source);
          sdf(t.q0, w, part.weight, t.mode, t.phi_m, "step", step, t.source);
          ms(t.q0, r, t.q1, part.b, -0.25 * std::numbers::pi, "disentangle", step, t.source);
        }
        break;
    }
  }

  void set_output(std::vector<NativePulse>* out) { out_ = out; }

  static constexpr double kMinAngle = 1e-15;

 private:
  std::vector<NativePulse>& out() { return *out_; }

  void update(std::size_t q, const SU2& g) {
    g_[q] = g;
    sch_.frame_registry[q].push_back(spin::quaternion(g));
    ids_[q] = sch_.frame_registry[q].size() - 1;
  }

  PulseSchedule& sch_;
  std::vector<SU2> g_;
  std::vector<std::size_t> ids_;
  std::vector<NativePulse>* out_ = nullptr;
};

/// Frame mapping the best-fit plane of the axes used early on into the x-y plane.
inline SU2 fit_frame(const std::vector<Vec3>& axes) {
  Mat3 m = Mat3::Zero();
  for (const auto& a : axes) m += a * a.transpose();
  if (axes.empty() || m(2, 2) <= 1e-20 * m.trace()) return SU2::Identity();
  Eigen::SelfAdjointEigenSolver<Mat3> es(m);
  Vec3 normal = es.eigenvectors().col(0);
  if (normal.z() < 0) normal = -normal;
  const auto r = spin::align(normal, Vec3::UnitZ());
  return spin::rotation(r.axis, r.angle);
}

}  // namespace detail

inline PulseSchedule build_schedule(const LvcmSpec& spec, const HardwareParams& hw, const CompileOptions& opt = {}) {
  if (opt.steps < 1) throw Error("Trotter step count must be at least 1");
  if (!(opt.tau_fs > 0.0)) throw Error("evolution time must be positive");
  hw.validate();
  PulseSchedule sch;
  sch.options = opt;
  sch.dt_fs = opt.tau_fs / static_cast<double>(opt.steps);
  sch.reg = make_register(spec, opt.encoding, opt.initial_state);
  sch.options.encoding = sch.reg.encoding;
  sch.states = spec.states();
  sch.modes = spec.modes();
  sch.nu = spec.frequencies();
  sch.n_ions = chain_size(spec.modes(), sch.reg.total_qubits());
  sch.durations = {hw, sdf_scale_us_per_rad(hw, sch.n_ions)};
  const auto radial = radial_mode_frequencies(hw, sch.n_ions);
  if (radial.size() < spec.modes()) throw UnsupportedChain("not enough non-CM radial modes for the simulated modes");
  sch.mode_frequency_mhz.assign(radial.begin(), radial.begin() + static_cast<std::ptrdiff_t>(spec.modes()));

  const std::size_t nq = sch.reg.total_qubits();
  std::vector<std::vector<QubitTerm>> first;
  for (std::size_t s = 1; s <= std::min<std::size_t>(2, opt.steps); ++s) {
    first.push_back(interaction_step(spec, sch.reg, s, sch.dt_fs, opt.order));
  }
  std::vector<std::vector<Vec3>> axes(nq);
  for (const auto& step : first) {
    for (const auto& t : step) {
      if (t.kind == QubitTerm::Kind::sdf) {
        if (t.axis.norm() > 0) axes[t.q0].push_back(t.axis.normalized());
      } else {
        for (const auto& c : product_components(t.coupling)) {
          axes[t.q0].push_back(c.a);
          axes[t.q1].push_back(c.b);
        }
      }
    }
  }
  std::vector<SU2> g(nq);
  for (std::size_t q = 0; q < nq; ++q) g[q] = detail::fit_frame(axes[q]);

  detail::Lowerer low(sch, g);
  low.set_output(&sch.prep);
  for (std::size_t q = 0; q < nq; ++q) {
    const Vec3 b = spin::bloch_rotation(g[q]) * sch.reg.initial_bloch[q];
    const auto r = spin::align(Vec3::UnitZ(), b);
    if (r.angle > 1e-15) sch.prep.push_back(low.carrier(q, r.axis, r.angle, "prep", 0, "prep"));
  }
  auto snapshot = [&] {
    sch.frames.push_back(low.frames());
    sch.frame_ids.push_back(low.ids());
  };
  snapshot();
  double total = 0.0;
  for (const auto& p : sch.prep) total += p.duration_us;
  sch.cumulative_us.push_back(total);
  sch.step_offsets.push_back(0);
  low.set_output(&sch.pulses);
  for (std::size_t s = 1; s <= opt.steps; ++s) {
    const auto terms = s <= first.size() ? first[s - 1] : interaction_step(spec, sch.reg, s, sch.dt_fs, opt.order);
    const std::size_t begin = sch.pulses.size();
    for (const auto& t : terms) low.lower(t, s);
    for (std::size_t i = begin; i < sch.pulses.size(); ++i) total += sch.pulses[i].duration_us;
    sch.cumulative_us.push_back(total);
    sch.step_offsets.push_back(sch.pulses.size());
    snapshot();
  }
  return sch;
}

/// Pulses returning the register to the molecular measurement basis after step s.
inline std::vector<NativePulse> correction_pulses(const PulseSchedule& sch, std::size_t s) {
  if (s > sch.steps()) throw IndexOutOfRange("stop step beyond the schedule");
  const double t = static_cast<double>(s) * sch.dt_fs;
  std::vector<NativePulse> out;
  const auto& g = sch.frames[s];
  auto make = [&](std::size_t q, const Vec3& e, double angle, const std::string& role) {
    double phi = spin::axis_phase(e), a = angle;
    if (a < 0) {
      a = -a;
      phi += std::numbers::pi;
    }
    if (a < 1e-15) return;
    NativePulse p;
    p.kind = PulseKind::carrier;
    p.step = sch.steps() + 1;
    p.qubits = {q};
    p.phi = {wrap_phase(phi)};
    p.angle = a;
    p.rabi_khz = sch.durations.carrier_rabi_khz();
    p.duration_us = sch.durations.carrier(a);
    p.frame_tag = role + "@q" + std::to_string(q) + ".f" + std::to_string(sch.frame_ids[s][q]);
    p.term = "correction";
    out.push_back(std::move(p));
  };
  for (std::size_t q = 0; q < sch.reg.qubits; ++q) {
    const SU2 u0 = free_evolution(sch.reg.h0[q], t);
    Vec3 m;
    if (sch.options.physical_rotation) {
      const Mat3 v = spin::bloch_rotation(g[q] * u0 * g[q].adjoint());
      const Vec3 euler = v.eulerAngles(0, 1, 0);
      make(q, Vec3::UnitX(), euler(2), "correction");
      make(q, Vec3::UnitY(), euler(1), "correction");
      make(q, Vec3::UnitX(), euler(0), "correction");
      m = spin::bloch_rotation(g[q]) * Vec3::UnitZ();
    } else {
      m = spin::bloch_rotation(g[q] * u0.adjoint()) * Vec3::UnitZ();
    }
    const auto r = spin::align(m, Vec3::UnitZ());
    make(q, r.axis, r.angle, "correction");
  }
  return out;
}

/// Lab time of one run stopped after step s: preparation, steps 1..s, correction.
inline double operation_time_until(const PulseSchedule& sch, std::size_t s) {
  double total = sch.cumulative_us.at(s);
  for (const auto& p : correction_pulses(sch, s)) total += p.duration_us;
  return total;
}

inline double operation_time_us(const PulseSchedule& sch) { return operation_time_until(sch, sch.steps()); }

/// Mean sdf duration over the whole schedule.
inline double mean_sdf_duration_us(const PulseSchedule& sch) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : sch.pulses) {
    if (p.kind == PulseKind::sdf) {
      sum += p.duration_us;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline double total_sdf_time_us(const PulseSchedule& sch) {
  double sum = 0.0;
  for (const auto& p : sch.pulses) {
    if (p.kind == PulseKind::sdf) sum += p.duration_us;
  }
  return sum;
}

inline std::string pulse_line(const NativePulse& p, const std::string& step) {
  using config::format_double;
  std::string qs, ph;
  for (std::size_t i = 0; i < p.qubits.size(); ++i) {
    qs += (i ? "," : "") + std::to_string(p.qubits[i]);
    ph += (i ? "," : "") + format_double(p.phi[i]);
  }
  return step + " " + to_string(p.kind) + " " + qs + " " + (p.mode ? std::to_string(*p.mode) : "-") + " " + ph + " " +
         format_double(p.phi_m) + " " + format_double(p.rabi_khz) + " " + format_double(p.duration_us) + " " +
         p.frame_tag + "\n";
}

/// Line-oriented schedule text: `#` header with totals and frames, then
/// `step kind qubits mode phi phi_m rabi_kHz duration_us frame_tag` per pulse.
/// Step column: `prep`, 1..S, `final` (correction for a full-length run).
inline std::string schedule_to_text(const PulseSchedule& sch) {
  using config::format_double;
  std::string out = "# lvcm pulse schedule v1\n";
  out += "# steps " + std::to_string(sch.steps()) + "\n";
  out += "# tau_fs " + format_double(sch.options.tau_fs) + "\n";
  out += "# dt_fs " + format_double(sch.dt_fs) + "\n";
  out += "# encoding " + to_string(sch.reg.encoding) + "\n";
  out += "# term_order " + to_string(sch.options.order) + "\n";
  out += "# qubits " + std::to_string(sch.reg.qubits) + "\n";
  out += "# ancilla " + (sch.reg.ancilla ? std::to_string(*sch.reg.ancilla) : std::string("none")) + "\n";
  out += "# n_ions " + std::to_string(sch.n_ions) + "\n";
  for (std::size_t k = 0; k < sch.modes; ++k) {
    out += "# mode " + std::to_string(k) + " radial_mhz " + format_double(sch.mode_frequency_mhz[k]) + "\n";
  }
  out += "# sdf_us_per_rad " + format_double(sch.durations.sdf_us_per_rad) + "\n";
  for (std::size_t q = 0; q < sch.frame_registry.size(); ++q) {
    for (std::size_t f = 0; f < sch.frame_registry[q].size(); ++f) {
      const auto& w = sch.frame_registry[q][f];
      out += "# frame q" + std::to_string(q) + ".f" + std::to_string(f) + " " + format_double(w[0]) + " " +
             format_double(w[1]) + " " + format_double(w[2]) + " " + format_double(w[3]) + "\n";
    }
  }
  const auto corr = correction_pulses(sch, sch.steps());
  out += "# pulses " + std::to_string(sch.prep.size() + sch.pulses.size() + corr.size()) + "\n";
  out += "# operation_time_us " + format_double(operation_time_us(sch)) + "\n";
  out += "# overhead_us " + format_double(sch.overhead_us()) + "\n";
  out += "# step kind qubits mode phi phi_m rabi_khz duration_us frame_tag\n";
  for (const auto& p : sch.prep) out += pulse_line(p, "prep");
  for (const auto& p : sch.pulses) out += pulse_line(p, std::to_string(p.step));
  for (const auto& p : corr) out += pulse_line(p, "final");
  return out;
}

}  // namespace lvcm::compiler
