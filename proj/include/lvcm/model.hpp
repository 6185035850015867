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
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lvcm/errors.hpp"
#include "lvcm/units.hpp"

namespace lvcm {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

enum class Envelope { constant, gaussian };

/// One dipole-allowed transition driven by the external field.
struct DriveTransition {
  std::size_t lower = 0;
  std::size_t upper = 0;
  std::array<double, 2> dipole{0.0, 0.0};
};

/// Classical field E(t) = amplitude * envelope(t) * Re(polarization * exp(-i carrier t))
/// coupling each transition through mu . E(t). Energies are in rad/fs.
///
/// With `rwa` set, the drive is expressed in the frame rotating at the carrier:
/// every state that is not the lower level of some transition is shifted by
/// -carrier and only the co-rotating half of the field is kept, so the
/// |lower><upper| coefficient becomes amplitude * envelope / 2 * (mu . conj(polarization)).
struct DriveSpec {
  std::vector<DriveTransition> transitions;
  std::array<cplx, 2> polarization{cplx{1.0, 0.0}, cplx{0.0, 0.0}};
  double amplitude = 0.0;
  double carrier = 0.0;
  Envelope envelope = Envelope::constant;
  double center_fs = 0.0;
  double width_fs = 1.0;
  bool rwa = true;

  double envelope_at(double t) const {
    if (envelope == Envelope::constant) return 1.0;
    const double u = (t - center_fs) / width_fs;
    return std::exp(-0.5 * u * u);
  }

  /// Coefficient multiplying |lower><upper| at time t (the Hermitian partner is implied).
  cplx coupling(const DriveTransition& tr, double t) const {
    const double env = amplitude * envelope_at(t);
    if (rwa) {
      const cplx proj = tr.dipole[0] * std::conj(polarization[0]) + tr.dipole[1] * std::conj(polarization[1]);
      return 0.5 * env * proj;
    }
    const cplx phase = std::exp(cplx{0.0, -carrier * t});
    const double field_x = std::real(polarization[0] * phase);
    const double field_y = std::real(polarization[1] * phase);
    return env * (tr.dipole[0] * field_x + tr.dipole[1] * field_y);
  }

  bool time_dependent() const { return !(rwa && envelope == Envelope::constant); }
};

/// Linear vibronic coupling model
///   H/hbar = sum_ij |i><j| (delta_ij + sum_k kappa_ijk (a_k + a_k^dag)) + sum_k nu_k a_k^dag a_k
/// plus an optional dipole drive. Immutable once built; all energies in rad/fs.
class LvcmSpec {
 public:
  static LvcmSpec create(CMatrix delta, std::vector<CMatrix> kappa, std::vector<double> nu,
                         std::optional<DriveSpec> drive = std::nullopt, std::vector<std::string> labels = {}) {
    LvcmSpec spec;
    spec.delta_ = std::move(delta);
    spec.kappa_ = std::move(kappa);
    spec.nu_ = std::move(nu);
    spec.drive_ = std::move(drive);
    spec.labels_ = std::move(labels);
    spec.validate();
    return spec;
  }

  std::size_t states() const { return static_cast<std::size_t>(delta_.rows()); }
  std::size_t modes() const { return nu_.size(); }

  const CMatrix& delta() const { return delta_; }
  cplx delta(std::size_t i, std::size_t j) const { return delta_(i, j); }
  const CMatrix& kappa(std::size_t k) const { return kappa_.at(k); }
  cplx kappa(std::size_t i, std::size_t j, std::size_t k) const { return kappa_.at(k)(i, j); }
  const std::vector<double>& frequencies() const { return nu_; }
  double nu(std::size_t k) const { return nu_.at(k); }
  const std::optional<DriveSpec>& drive() const { return drive_; }
  const std::vector<std::string>& labels() const { return labels_; }

  std::string label(std::size_t i) const {
    return i < labels_.size() ? labels_[i] : std::to_string(i);
  }

  bool time_dependent() const { return drive_ && drive_->time_dependent(); }

  /// States that keep their energy in the rotating frame (lower levels of driven transitions).
  std::vector<bool> rwa_lower_states() const {
    std::vector<bool> lower(states(), false);
    if (drive_) {
      for (const auto& tr : drive_->transitions) lower[tr.lower] = true;
    }
    return lower;
  }

  /// Electronic block delta + drive(t), in the rotating frame when the drive uses RWA.
  CMatrix electronic_hamiltonian(double t) const {
    CMatrix h = delta_;
    if (!drive_) return h;
    if (drive_->rwa) {
      const auto lower = rwa_lower_states();
      for (std::size_t i = 0; i < states(); ++i) {
        if (!lower[i]) h(i, i) -= drive_->carrier;
      }
    }
    for (const auto& tr : drive_->transitions) {
      const cplx c = drive_->coupling(tr, t);
      h(tr.lower, tr.upper) += c;
      h(tr.upper, tr.lower) += std::conj(c);
    }
    return h;
  }

  friend bool operator==(const LvcmSpec& a, const LvcmSpec& b) {
    if (a.delta_ != b.delta_ || a.nu_ != b.nu_ || a.labels_ != b.labels_) return false;
    if (a.kappa_.size() != b.kappa_.size()) return false;
    for (std::size_t k = 0; k < a.kappa_.size(); ++k) {
      if (a.kappa_[k] != b.kappa_[k]) return false;
    }
    if (a.drive_.has_value() != b.drive_.has_value()) return false;
    if (!a.drive_) return true;
    const auto& x = *a.drive_;
    const auto& y = *b.drive_;
    if (x.transitions.size() != y.transitions.size()) return false;
    for (std::size_t i = 0; i < x.transitions.size(); ++i) {
      const auto& s = x.transitions[i];
      const auto& r = y.transitions[i];
      if (s.lower != r.lower || s.upper != r.upper || s.dipole != r.dipole) return false;
    }
    return x.polarization == y.polarization && x.amplitude == y.amplitude && x.carrier == y.carrier &&
           x.envelope == y.envelope && x.center_fs == y.center_fs && x.width_fs == y.width_fs && x.rwa == y.rwa;
  }

 private:
  LvcmSpec() = default;

  static bool hermitian(const CMatrix& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
  }

  void validate() const {
    const auto m = delta_.rows();
    if (m < 1 || delta_.cols() != m) throw InvalidModel("delta must be a non-empty square matrix");
    if (!hermitian(delta_)) throw InvalidModel("delta is not Hermitian");
    if (kappa_.size() != nu_.size()) throw InvalidModel("kappa tensor and frequency list disagree on mode count");
    for (std::size_t k = 0; k < kappa_.size(); ++k) {
      if (kappa_[k].rows() != m || kappa_[k].cols() != m)
        throw InvalidModel("kappa block for mode " + std::to_string(k) + " has wrong shape");
      if (!hermitian(kappa_[k])) throw InvalidModel("kappa is not Hermitian for mode " + std::to_string(k));
      if (!(nu_[k] > 0.0) || !std::isfinite(nu_[k]))
        throw InvalidModel("mode frequency must be positive (mode " + std::to_string(k) + ")");
    }
    if (!labels_.empty() && labels_.size() != static_cast<std::size_t>(m))
      throw InvalidModel("label count does not match state count");
    if (drive_) {
      const double pol = std::norm(drive_->polarization[0]) + std::norm(drive_->polarization[1]);
      if (!(pol > 0.0)) throw InvalidModel("drive polarization has zero norm");
      if (drive_->envelope == Envelope::gaussian && !(drive_->width_fs > 0.0))
        throw InvalidModel("gaussian envelope width must be positive");
      for (const auto& tr : drive_->transitions) {
        if (tr.lower >= static_cast<std::size_t>(m) || tr.upper >= static_cast<std::size_t>(m) || tr.lower == tr.upper)
          throw InvalidModel("drive transition references an invalid state pair");
      }
    }
  }

  CMatrix delta_;
  std::vector<CMatrix> kappa_;
  std::vector<double> nu_;
  std::optional<DriveSpec> drive_;
  std::vector<std::string> labels_;
};

/// lambda = kappa^2 * sum_k 1/nu_k.
inline double reorganization_energy(const std::vector<double>& nu, double kappa) {
  double inv = 0.0;
  for (double v : nu) {
    if (!(v > 0.0)) throw InvalidModel("reorganization energy needs positive mode frequencies");
    inv += 1.0 / v;
  }
  return kappa * kappa * inv;
}

inline double reorganization_energy(const LvcmSpec& spec, double kappa) {
  return reorganization_energy(spec.frequencies(), kappa);
}

// Donor-acceptor benchmark parameters.
inline constexpr double kToyDeltaEv = 0.08679;
inline constexpr double kToyFrequencySpreadEv = 0.01240;

inline std::vector<double> toy_frequencies_ev(std::size_t n) {
  if (n == 0) throw InvalidModel("toy model needs at least one mode");
  std::vector<double> nu(n);
  for (std::size_t k = 0; k < n; ++k) {
    nu[k] = n == 1 ? kToyDeltaEv : kToyDeltaEv + kToyFrequencySpreadEv * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return nu;
}

/// Coupling kappa that yields reorganization energy lambda for the given frequencies.
inline double coupling_for_reorganization(const std::vector<double>& nu, double lambda) {
  if (lambda < 0.0) throw InvalidModel("reorganization energy must be non-negative");
  return std::sqrt(lambda / reorganization_energy(nu, 1.0));
}

/// Two-state donor/acceptor model with N modes:
///   (Delta/2)(|D><A| + h.c.) + sum_k (kappa/2)(|D><D| - |A><A|)(a_k + a_k^dag) + nu_k a_k^dag a_k.
/// Both site energies are zero.
inline LvcmSpec build_toy_model(std::size_t n_modes, double lambda_over_delta) {
  if (n_modes == 0) throw InvalidModel("toy model needs N >= 1");
  if (!(lambda_over_delta >= 0.0)) throw InvalidModel("lambda/Delta must be non-negative");
  const double delta = units::ev_to_rad_per_fs(kToyDeltaEv);
  std::vector<double> nu;
  for (double e : toy_frequencies_ev(n_modes)) nu.push_back(units::ev_to_rad_per_fs(e));
  const double kappa = coupling_for_reorganization(nu, lambda_over_delta * delta);

  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 1) = d(1, 0) = 0.5 * delta;
  std::vector<CMatrix> k(n_modes, CMatrix::Zero(2, 2));
  for (auto& block : k) {
    block(0, 0) = 0.5 * kappa;
    block(1, 1) = -0.5 * kappa;
  }
  return LvcmSpec::create(std::move(d), std::move(k), std::move(nu), std::nullopt, {"D", "A"});
}

/// Diagonal coupling kappa recovered from a toy model (kappa_DDk = kappa / 2).
inline double toy_coupling(const LvcmSpec& spec) {
  if (spec.states() != 2 || spec.modes() == 0) throw InvalidModel("not a toy model");
  return 2.0 * spec.kappa(0, 0, 0).real();
}

/// Conical-intersection model: mode x couples the states, mode z tunes their splitting.
inline LvcmSpec build_ci_model(double kx, double kz, double nux, double nuz) {
  if (!(nux > 0.0) || !(nuz > 0.0)) throw InvalidModel("CI mode frequencies must be positive");
  std::vector<CMatrix> k(2, CMatrix::Zero(2, 2));
  k[0](0, 1) = k[0](1, 0) = kx;
  k[1](0, 0) = kz;
  k[1](1, 1) = -kz;
  return LvcmSpec::create(CMatrix::Zero(2, 2), std::move(k), {nux, nuz}, std::nullopt, {"D", "A"});
}

struct AdiabaticPair {
  double lower = 0.0;
  double upper = 0.0;
};

/// Adiabatic energies E+- = nu_x/2 (x^2+px^2) + nu_z/2 (z^2+pz^2) +- sqrt(2 kx^2 x^2 + 2 kz^2 z^2)
/// for a model produced by build_ci_model (dimensionless coordinates, rad/fs energies).
inline AdiabaticPair ci_adiabatic_surfaces(const LvcmSpec& spec, double x, double z, double px, double pz) {
  const bool shape = spec.states() == 2 && spec.modes() == 2 && !spec.drive() &&
                     spec.delta().cwiseAbs().maxCoeff() == 0.0 && spec.kappa(0)(0, 0) == 0.0 &&
                     spec.kappa(0)(1, 1) == 0.0 && spec.kappa(0)(0, 1).imag() == 0.0 &&
                     spec.kappa(1)(0, 1) == 0.0 && spec.kappa(1)(0, 0) == -spec.kappa(1)(1, 1) &&
                     spec.kappa(1)(0, 0).imag() == 0.0;
  if (!shape) throw InvalidModel("ci_adiabatic_surfaces needs a conical-intersection model");
  const double kx = spec.kappa(0, 1, 0).real();
  const double kz = spec.kappa(0, 0, 1).real();
  const double base = 0.5 * spec.nu(0) * (x * x + px * px) + 0.5 * spec.nu(1) * (z * z + pz * pz);
  const double gap = std::sqrt(2.0 * kx * kx * x * x + 2.0 * kz * kz * z * z);
  return {base - gap, base + gap};
}

/// Vibrationally-assisted energy transfer model with three modes: mode 1 couples to
/// D only, mode 2 to both states, mode 3 to A only. Site energies are (0, E_A - E_D).
inline LvcmSpec build_vaet_model(double e_d, double e_a, double delta, double kappa_d1, double kappa_d2,
                                 double kappa_a2, double kappa_a3, const std::array<double, 3>& nu) {
  for (double v : nu) {
    if (!(v > 0.0)) throw InvalidModel("VAET mode frequencies must be positive");
  }
  CMatrix d = CMatrix::Zero(2, 2);
  d(1, 1) = e_a - e_d;
  d(0, 1) = d(1, 0) = 0.5 * delta;
  std::vector<CMatrix> k(3, CMatrix::Zero(2, 2));
  k[0](0, 0) = kappa_d1;
  k[1](0, 0) = kappa_d2;
  k[1](1, 1) = kappa_a2;
  k[2](1, 1) = kappa_a3;
  return LvcmSpec::create(std::move(d), std::move(k), {nu[0], nu[1], nu[2]}, std::nullopt, {"D", "A"});
}

enum class ModeCorrelation { none, correlated, anti_correlated };

/// For a mode diagonally coupled to exactly two states, whether the couplings share a sign.
inline ModeCorrelation mode_correlation(const LvcmSpec& spec, std::size_t k) {
  std::vector<double> diag;
  for (std::size_t i = 0; i < spec.states(); ++i) {
    const double v = spec.kappa(i, i, k).real();
    if (v != 0.0) diag.push_back(v);
  }
  if (diag.size() != 2) return ModeCorrelation::none;
  return diag[0] * diag[1] > 0.0 ? ModeCorrelation::correlated : ModeCorrelation::anti_correlated;
}

/// Polarized-light-induced electron transfer: states {G, D1, D2, A}, drive G<->D_i through
/// orthogonal dipoles mu_i, static transfer couplings V_i between D_i and A. No modes.
inline LvcmSpec build_plet_model(const std::array<double, 4>& omega, const std::array<double, 2>& mu1,
                                 const std::array<double, 2>& mu2, cplx v1, cplx v2, DriveSpec drive) {
  const double dot = mu1[0] * mu2[0] + mu1[1] * mu2[1];
  const double n1 = std::hypot(mu1[0], mu1[1]);
  const double n2 = std::hypot(mu2[0], mu2[1]);
  if (std::abs(dot) > 1e-12 * std::max(1.0, n1 * n2))
    throw InvalidModel("PLET dipoles must be orthogonal");
  CMatrix d = CMatrix::Zero(4, 4);
  for (int j = 0; j < 4; ++j) d(j, j) = omega[static_cast<std::size_t>(j)];
  d(1, 3) = v1;
  d(3, 1) = std::conj(v1);
  d(2, 3) = v2;
  d(3, 2) = std::conj(v2);
  drive.transitions = {DriveTransition{0, 1, mu1}, DriveTransition{0, 2, mu2}};
  return LvcmSpec::create(std::move(d), {}, {}, std::move(drive), {"G", "D1", "D2", "A"});
}

}  // namespace lvcm
