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

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "lvcm/errors.hpp"
#include "lvcm/hardware.hpp"
#include "lvcm/hilbert.hpp"
#include "lvcm/linalg.hpp"
#include "lvcm/pulse_compiler.hpp"
#include "lvcm/rng.hpp"
#include "lvcm/spin.hpp"
#include "lvcm/trace.hpp"

namespace lvcm::emulator {

using compiler::NativePulse;
using compiler::PulseKind;
using compiler::PulseSchedule;
using linalg::LocalPlan;

enum class HeatingModel { upward, symmetric };

inline std::string to_string(HeatingModel h) { return h == HeatingModel::upward ? "upward" : "symmetric"; }
inline HeatingModel parse_heating_model(const std::string& s) {
  if (s == "upward") return HeatingModel::upward;
  if (s == "symmetric") return HeatingModel::symmetric;
  throw Error("unknown heating model " + s);
}

/// Lindblad channels. Motional dephasing L = sqrt(2 gamma_m) a^dag a (adjacent
/// Fock coherences decay at gamma_m); heating L = sqrt(Gamma) a^dag (plus
/// sqrt(Gamma) a when symmetric); laser dephasing L = sqrt(gamma_L / 2) Z on
/// addressed qubits (qubit coherence decays at gamma_L).
struct NoiseChannels {
  double motional_dephasing_per_ms = 1.0 / 36.0;
  double heating_quanta_per_s = 5.0;
  double laser_dephasing_per_ms = 1.0 / 496.0;
  bool motional_dephasing = true;
  bool heating = true;
  bool laser_dephasing = true;
  HeatingModel heating_model = HeatingModel::symmetric;

  static NoiseChannels off() {
    NoiseChannels c;
    c.motional_dephasing = c.heating = c.laser_dephasing = false;
    return c;
  }

  static NoiseChannels from_hardware(const HardwareParams& hw) {
    NoiseChannels c;
    c.motional_dephasing_per_ms = 1.0 / hw.motional_coherence_ms;
    c.heating_quanta_per_s = hw.heating_quanta_per_s;
    c.laser_dephasing_per_ms = 1.0 / hw.laser_coherence_ms;
    return c;
  }

  bool any() const {
    return (motional_dephasing && motional_dephasing_per_ms > 0) || (heating && heating_quanta_per_s > 0) ||
           (laser_dephasing && laser_dephasing_per_ms > 0);
  }

  double dephasing_per_us() const { return motional_dephasing ? motional_dephasing_per_ms * 1e-3 : 0.0; }
  double heating_per_us() const { return heating ? heating_quanta_per_s * 1e-6 : 0.0; }
  double laser_per_us() const { return laser_dephasing ? laser_dephasing_per_ms * 1e-3 : 0.0; }

  void validate() const {
    if (motional_dephasing_per_ms < 0 || heating_quanta_per_s < 0 || laser_dephasing_per_ms < 0) {
      throw Error("noise rates must be non-negative");
    }
  }
};

struct MeasurementPolicy {
  std::size_t runs = 100;
  std::size_t points = 40;
  std::uint64_t seed = 1;
};

struct EmulatorOptions {
  /// Check positivity after every pulse (otherwise only at stops).
  bool strict = false;
  /// Upper bound on rate x substep duration for the Strang splitting.
  double substep_threshold = 0.25;
  double trace_tolerance = 1e-6;
  double eigen_tolerance = 1e-6;
};

struct Diagnostics {
  std::size_t pulses = 0;
  std::size_t substeps = 0;
  std::size_t positivity_checks = 0;
  double max_trace_error = 0.0;
};

struct StopResult {
  std::size_t step = 0;
  double time_fs = 0.0;
  std::vector<double> populations;
  double leakage = 0.0;
  std::vector<double> mode_leakage;
  double operation_time_us = 0.0;
};

/// Stop steps s_j = round(j S / points), j = 0 .. points-1.
inline std::vector<std::size_t> stop_steps(std::size_t steps, std::size_t points) {
  std::vector<std::size_t> s(points);
  for (std::size_t j = 0; j < points; ++j) {
    s[j] = static_cast<std::size_t>(std::llround(static_cast<double>(j) * static_cast<double>(steps) / static_cast<double>(points)));
  }
  return s;
}

class Emulator {
 public:
  static constexpr double kHeatingPieceLimit = 1e-2;

  Emulator(const PulseSchedule& sch, std::vector<std::size_t> cutoffs, NoiseChannels noise = NoiseChannels::off(),
           EmulatorOptions opt = {})
      : sch_(sch), layout_(sch.reg.total_qubits(), std::move(cutoffs)), noise_(noise), opt_(opt) {
    if (layout_.mode_count() != sch.modes) throw LayoutMismatch("one cutoff per simulated mode is required");
    noise_.validate();
    const std::size_t d = layout_.dimension();
    digits_.assign(layout_.factor_count(), std::vector<int>(d));
    for (std::size_t f = 0; f < layout_.factor_count(); ++f)
      for (std::size_t i = 0; i < d; ++i) digits_[f][i] = static_cast<int>(layout_.digit(i, f));
    for (std::size_t k = 0; k < layout_.mode_count(); ++k) {
      const auto c = layout_.cutoff(k);
      if (quadrature_.count(c)) continue;
      Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
      for (std::size_t n = 1; n < c; ++n) {
        x(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n)) = x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n - 1)) =
            std::sqrt(static_cast<double>(n));
      }
      quadrature_.emplace(c, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(x));
    }
  }

  const SpaceLayout& layout() const { return layout_; }
  const Diagnostics& diagnostics() const { return diag_; }
  const NoiseChannels& noise() const { return noise_; }

  Eigen::VectorXcd initial_vector() const {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(layout_.dimension()));
    psi(0) = 1.0;
    return psi;
  }

  Eigen::MatrixXcd initial_density() const {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(layout_.dimension()),
                                                  static_cast<Eigen::Index>(layout_.dimension()));
    rho(0, 0) = 1.0;
    return rho;
  }

  /// Local unitary of a pulse (or of the fraction `f` of its angle) and the factors it acts on.
  Eigen::MatrixXcd local_unitary(const NativePulse& p, double f = 1.0) const {
    const double th = p.angle * f;
    switch (p.kind) {
      case PulseKind::carrier:
        return spin::carrier_matrix(th, p.phi[0]);
      case PulseKind::sdf: {
        const std::size_t c = layout_.cutoff(*p.mode);
        const auto& es = quadrature_.at(c);
        const auto n = static_cast<Eigen::Index>(c);
        // F(phi_m) = R X R^dag with R = exp(-i phi_m a^dag a).
        Eigen::VectorXcd r(n);
        for (Eigen::Index k = 0; k < n; ++k) r(k) = std::exp(cplx{0.0, -p.phi_m * static_cast<double>(k)});
        const Eigen::MatrixXcd v = r.asDiagonal() * es.eigenvectors().cast<cplx>();
        const Eigen::Matrix2cd s = sigma_phi_matrix(p.phi[0]);
        Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
        for (int sign : {1, -1}) {
          const Eigen::Matrix2cd proj = 0.5 * (Eigen::Matrix2cd::Identity() + static_cast<double>(sign) * s);
          Eigen::VectorXcd ph(n);
          for (Eigen::Index k = 0; k < n; ++k) ph(k) = std::exp(cplx{0.0, -th * sign * es.eigenvalues()(k)});
          const Eigen::MatrixXcd m = v * ph.asDiagonal() * v.adjoint();
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) u.block(a * n, b * n, n, n) += proj(a, b) * m;
        }
        return u;
      }
      case PulseKind::ms: {
        const Eigen::Matrix2cd s0 = sigma_phi_matrix(p.phi[0]), s1 = sigma_phi_matrix(p.phi[1]);
        Eigen::Matrix4cd ss;
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c) ss.block<2, 2>(2 * r, 2 * c) = s0(r, c) * s1;
        // (s0 s1)^2 = 1
        return std::cos(th) * Eigen::Matrix4cd::Identity() - cplx{0.0, std::sin(th)} * ss;
      }
    }
    return {};
  }

  const LocalPlan& plan(const NativePulse& p) {
    std::vector<std::size_t> f;
    for (std::size_t q : p.qubits) f.push_back(layout_.qubit_factor(q));
    if (p.kind == PulseKind::sdf) f.push_back(layout_.mode_factor(*p.mode));
    auto it = plans_.find(f);
    if (it == plans_.end()) it = plans_.emplace(f, LocalPlan(layout_.factor_dims(), f)).first;
    return it->second;
  }

  void apply(Eigen::VectorXcd& psi, const NativePulse& p) {
    plan(p).apply(local_unitary(p), psi);
    ++diag_.pulses;
  }

  /// Dissipator of all active channels over `t_us`; laser dephasing only on `addressed`.
  void dissipate(Eigen::MatrixXcd& rho, double t_us, const std::vector<std::size_t>& addressed) {
    if (t_us <= 0) return;
    const double gm = noise_.dephasing_per_us(), gl = noise_.laser_per_us(), gh = noise_.heating_per_us();
    if (gm > 0 || (gl > 0 && !addressed.empty())) rho.array() *= dephasing_factors(t_us, gl > 0 ? addressed : std::vector<std::size_t>{}).array();
    if (gh > 0) {
      for (std::size_t k = 0; k < layout_.mode_count(); ++k) {
        // The one-jump Kraus pair is first order in r g_n; keep that product small.
        const double r = gh * t_us;
        const auto pieces = static_cast<std::size_t>(
            std::ceil(r * static_cast<double>(layout_.cutoff(k)) / kHeatingPieceLimit));
        const double rp = r / static_cast<double>(std::max<std::size_t>(1, pieces));
        for (std::size_t i = 0; i < std::max<std::size_t>(1, pieces); ++i) {
          heat(rho, k, rp, true);
          if (noise_.heating_model == HeatingModel::symmetric) heat(rho, k, rp, false);
        }
      }
    }
  }

  /// Strang-split noisy evolution through one pulse.
  void lindblad_step(Eigen::MatrixXcd& rho, const NativePulse& p) {
    const LocalPlan& pl = plan(p);
    ++diag_.pulses;
    if (!noise_.any()) {
      pl.conjugate(local_unitary(p), rho);
      check(rho);
      return;
    }
    const std::size_t n = substeps(p.duration_us);
    const double h = p.duration_us / static_cast<double>(n);
    const Eigen::MatrixXcd u = local_unitary(p, 1.0 / static_cast<double>(n));
    for (std::size_t s = 0; s < n; ++s) {
      dissipate(rho, 0.5 * h, p.qubits);
      pl.conjugate(u, rho);
      dissipate(rho, 0.5 * h, p.qubits);
    }
    diag_.substeps += n;
    check(rho);
  }

  std::size_t substeps(double duration_us) const {
    double rate = 0.0;
    for (std::size_t k = 0; k < layout_.mode_count(); ++k) {
      const double top = static_cast<double>(layout_.cutoff(k) - 1);
      rate = std::max(rate, noise_.dephasing_per_us() * top * top + 2.0 * noise_.heating_per_us() * (top + 1.0));
    }
    rate += noise_.laser_per_us();
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(rate * duration_us / opt_.substep_threshold)));
  }

  /// Populations per electronic state after applying the stop-s correction to a copy.
  template <class State>
  StopResult measure_stop(const State& state, std::size_t s) {
    State work = state;
    for (const auto& p : compiler::correction_pulses(sch_, s)) advance(work, p);
    if constexpr (std::is_same_v<State, Eigen::MatrixXcd>) {
      if (!opt_.strict) positivity(work);
    }
    Eigen::VectorXd diag;
    if constexpr (std::is_same_v<State, Eigen::MatrixXcd>) {
      diag = work.diagonal().real();
    } else {
      diag = work.cwiseAbs2();
    }
    StopResult r;
    r.step = s;
    r.time_fs = static_cast<double>(s) * sch_.dt_fs;
    r.operation_time_us = compiler::operation_time_until(sch_, s);
    for (const auto& [q, outcome] : sch_.reg.measurement) {
      const auto pops = factor_populations(layout_, diag, layout_.qubit_factor(q));
      r.populations.push_back(pops[static_cast<std::size_t>(outcome)]);
    }
    for (std::size_t k = 0; k < layout_.mode_count(); ++k) {
      r.mode_leakage.push_back(factor_populations(layout_, diag, layout_.mode_factor(k)).back());
      r.leakage = std::max(r.leakage, r.mode_leakage.back());
    }
    return r;
  }

  void advance(Eigen::VectorXcd& psi, const NativePulse& p) { apply(psi, p); }
  void advance(Eigen::MatrixXcd& rho, const NativePulse& p) { lindblad_step(rho, p); }

  /// Runs preparation and all steps, measuring at each requested stop (ascending).
  template <class State>
  std::vector<StopResult> run(State state, const std::vector<std::size_t>& stops) {
    std::vector<StopResult> out;
    for (const auto& p : sch_.prep) advance(state, p);
    std::size_t next = 0, s = 0;
    while (next < stops.size()) {
      if (stops[next] < s) throw Error("stop steps must be ascending");
      if (stops[next] > sch_.steps()) throw IndexOutOfRange("stop step beyond the schedule");
      if (stops[next] == s) {
        out.push_back(measure_stop(state, s));
        ++next;
        continue;
      }
      ++s;
      for (std::size_t i = sch_.step_offsets[s - 1]; i < sch_.step_offsets[s]; ++i) advance(state, sch_.pulses[i]);
    }
    return out;
  }

  std::vector<StopResult> run_ideal(const std::vector<std::size_t>& stops) { return run(initial_vector(), stops); }
  std::vector<StopResult> run_density(const std::vector<std::size_t>& stops) { return run(initial_density(), stops); }

  /// Density matrix after preparation, steps 1..s and the stop-s correction.
  Eigen::MatrixXcd run_schedule(std::size_t s) {
    Eigen::MatrixXcd rho = initial_density();
    for (const auto& p : sch_.prep) lindblad_step(rho, p);
    for (std::size_t i = 0; i < sch_.step_offsets.at(s); ++i) lindblad_step(rho, sch_.pulses[i]);
    for (const auto& p : compiler::correction_pulses(sch_, s)) lindblad_step(rho, p);
    return rho;
  }

  void positivity(const Eigen::MatrixXcd& rho) {
    ++diag_.positivity_checks;
    const auto d = rho.rows();
    Eigen::MatrixXcd shifted = rho;
    shifted.diagonal().array() += 1e-8;
    Eigen::LLT<Eigen::MatrixXcd> llt(shifted);
    if (llt.info() == Eigen::Success) return;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    if (lo < -opt_.eigen_tolerance) {
      throw NumericalFailure("density matrix lost positivity: eigenvalue " + std::to_string(lo) + " (dimension " +
                             std::to_string(d) + ")");
    }
  }

 private:
  void check(const Eigen::MatrixXcd& rho) {
    const double err = std::abs(rho.trace().real() - 1.0);
    diag_.max_trace_error = std::max(diag_.max_trace_error, err);
    if (err > opt_.trace_tolerance) throw NumericalFailure("density matrix trace drifted by " + std::to_string(err));
    if (opt_.strict) positivity(rho);
  }

  /// exp(-t [gamma_m sum_k (n_k - n_k')^2 + gamma_L sum_q (b_q != b_q')]) per element, cached by (t, qubits).
  const Eigen::MatrixXd& dephasing_factors(double t_us, const std::vector<std::size_t>& addressed) {
    auto key = std::make_pair(t_us, addressed);
    auto it = factors_.find(key);
    if (it != factors_.end()) return it->second;
    if (factors_.size() > 64) factors_.clear();
    const double gm = noise_.dephasing_per_us(), gl = noise_.laser_per_us();
    const auto d = static_cast<Eigen::Index>(layout_.dimension());
    std::vector<std::size_t> mf, qf;
    for (std::size_t k = 0; k < layout_.mode_count(); ++k) mf.push_back(layout_.mode_factor(k));
    for (std::size_t q : addressed) qf.push_back(layout_.qubit_factor(q));
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) {
        double r = 0.0;
        for (std::size_t f : mf) {
          const int dn = digits_[f][static_cast<std::size_t>(i)] - digits_[f][static_cast<std::size_t>(j)];
          r += gm * dn * dn;
        }
        for (std::size_t f : qf) {
          if (digits_[f][static_cast<std::size_t>(i)] != digits_[f][static_cast<std::size_t>(j)]) r += gl;
        }
        m(i, j) = std::exp(-r * t_us);
      }
    }
    return factors_.emplace(std::move(key), std::move(m)).first->second;
  }

  /// One-sided heating Kraus map with K0 = diag(exp(-r g_n / 2)),
  /// K1 = sqrt(1 - exp(-r g_n)) |n +- 1><n|, g_n = n + 1 (up) or n (down).
  /// The top Fock level is closed for upward transitions. Applied in place:
  /// the sweep direction reads every source element before it is overwritten.
  void heat(Eigen::MatrixXcd& rho, std::size_t k, double r, bool up) const {
    const std::size_t f = layout_.mode_factor(k);
    const auto& dig = digits_[f];
    const int top = static_cast<int>(layout_.cutoff(k)) - 1;
    const auto stride = static_cast<Eigen::Index>(layout_.stride(f));
    const auto d = static_cast<Eigen::Index>(layout_.dimension());
    std::vector<double> keep(static_cast<std::size_t>(d)), move(static_cast<std::size_t>(d));
    std::vector<char> fed(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
      const int n = dig[static_cast<std::size_t>(i)];
      const bool open = up ? n < top : n > 0;
      const double g = up ? n + 1.0 : static_cast<double>(n);
      keep[static_cast<std::size_t>(i)] = open ? std::exp(-0.5 * r * g) : 1.0;
      move[static_cast<std::size_t>(i)] = open ? std::sqrt(-std::expm1(-r * g)) : 0.0;
      fed[static_cast<std::size_t>(i)] = up ? n > 0 : n < top;
    }
    const Eigen::Index shift = up ? stride : -stride;
    auto update = [&](Eigen::Index i, Eigen::Index j) {
      cplx v = keep[static_cast<std::size_t>(i)] * keep[static_cast<std::size_t>(j)] * rho(i, j);
      if (fed[static_cast<std::size_t>(i)] && fed[static_cast<std::size_t>(j)]) {
        const Eigen::Index si = i - shift, sj = j - shift;
        v += move[static_cast<std::size_t>(si)] * move[static_cast<std::size_t>(sj)] * rho(si, sj);
      }
      rho(i, j) = v;
    };
    if (up) {
      for (Eigen::Index j = d; j-- > 0;)
        for (Eigen::Index i = d; i-- > 0;) update(i, j);
    } else {
      for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) update(i, j);
    }
  }

  const PulseSchedule& sch_;
  SpaceLayout layout_;
  NoiseChannels noise_;
  EmulatorOptions opt_;
  Diagnostics diag_;
  std::vector<std::vector<int>> digits_;
  std::map<std::size_t, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>> quadrature_;
  std::map<std::vector<std::size_t>, LocalPlan> plans_;
  std::map<std::pair<double, std::vector<std::size_t>>, Eigen::MatrixXd> factors_;
};

/// Raises Fock cutoffs of the noiseless emulation until no mode keeps more than
/// `eps` population in its top level at any stop. The Trotterized state reaches
/// higher Fock levels than the exact dynamics, so the search starts from the
/// exact module's cutoffs and only grows.
inline std::vector<std::size_t> converge_ideal_cutoffs(const PulseSchedule& sch, std::vector<std::size_t> cutoffs,
                                                      std::size_t points = 40, double eps = 1e-4,
                                                      std::size_t increment = 4,
                                                      std::size_t max_dimension = kDefaultMaxDimension) {
  if (cutoffs.size() != sch.modes) cutoffs.assign(sch.modes, 2);
  const auto stops = stop_steps(sch.steps(), points);
  for (int iter = 0; iter < 200; ++iter) {
    Emulator em(sch, cutoffs);
    std::vector<double> worst(sch.modes, 0.0);
    for (const auto& r : em.run_ideal(stops)) {
      for (std::size_t k = 0; k < sch.modes; ++k) worst[k] = std::max(worst[k], r.mode_leakage[k]);
    }
    bool raised = false;
    for (std::size_t k = 0; k < sch.modes; ++k) {
      if (worst[k] >= eps) {
        cutoffs[k] += increment;
        raised = true;
      }
    }
    if (!raised) return cutoffs;
    std::size_t dim = sch.reg.total_qubits() < 64 ? (std::size_t{1} << sch.reg.total_qubits()) : max_dimension + 1;
    for (std::size_t c : cutoffs) dim = dim > max_dimension / c ? max_dimension + 1 : dim * c;
    if (dim > max_dimension) throw DimensionLimitExceeded("emulator cutoff search exceeded the dimension limit");
  }
  throw ConvergenceFailure("emulator cutoff search did not settle", {}, {});
}

/// Population trace at the measurement stops; the state-vector path is used when
/// every channel is off.
inline PopulationTrace emulate(const PulseSchedule& sch, const std::vector<std::size_t>& cutoffs,
                               const NoiseChannels& noise, std::size_t points = 40, EmulatorOptions opt = {},
                               Diagnostics* diagnostics = nullptr) {
  Emulator em(sch, cutoffs, noise, opt);
  const auto stops = stop_steps(sch.steps(), points);
  const bool noisy = noise.any();
  const auto res = noisy ? em.run_density(stops) : em.run_ideal(stops);
  PopulationTrace tr;
  std::string op;
  for (const auto& r : res) {
    tr.times.push_back(r.time_fs);
    tr.populations.push_back(r.populations);
    tr.leakage.push_back(r.leakage);
    op += (op.empty() ? "" : ",") + config::format_double(r.operation_time_us);
  }
  std::string cut;
  for (std::size_t c : cutoffs) cut += (cut.empty() ? "" : ",") + std::to_string(c);
  tr.metadata["method"] = noisy ? "ion-noisy" : "ion-ideal";
  tr.metadata["cutoffs"] = cut;
  tr.metadata["steps"] = std::to_string(sch.steps());
  tr.metadata["operation_time_us"] = op;
  tr.metadata["max_trace_error"] = config::format_double(em.diagnostics().max_trace_error);
  tr.metadata["positivity_checks"] = std::to_string(em.diagnostics().positivity_checks);
  if (diagnostics) *diagnostics = em.diagnostics();
  return tr;
}

/// R Bernoulli outcomes per qubit and time point; sampled frequency plus the
/// uncertainty sqrt(P(1-P)/R). Streams are seeded from (seed, time index, qubit).
inline PopulationTrace measure_with_shot_noise(PopulationTrace tr, const std::vector<std::pair<std::size_t, int>>& measurement,
                                               const MeasurementPolicy& policy) {
  if (policy.runs < 1) throw Error("runs per time point must be at least 1");
  if (measurement.size() != tr.states()) throw LayoutMismatch("measurement map does not match the trace");
  const double runs = static_cast<double>(policy.runs);
  tr.sampled.emplace();
  tr.sigma.emplace();
  for (std::size_t j = 0; j < tr.size(); ++j) {
    std::map<std::size_t, double> freq;
    for (std::size_t i = 0; i < measurement.size(); ++i) {
      const auto [q, outcome] = measurement[i];
      if (freq.count(q)) continue;
      const double p = std::clamp(outcome == 1 ? tr.populations[j][i] : 1.0 - tr.populations[j][i], 0.0, 1.0);
      Rng rng(derive_seed(derive_seed(policy.seed, j), q));
      std::size_t ones = 0;
      for (std::size_t r = 0; r < policy.runs; ++r) ones += rng.bernoulli(p) ? 1 : 0;
      freq[q] = static_cast<double>(ones) / runs;
    }
    std::vector<double> s, e;
    for (const auto& [q, outcome] : measurement) {
      const double f = outcome == 1 ? freq[q] : 1.0 - freq[q];
      s.push_back(f);
      e.push_back(std::sqrt(f * (1.0 - f) / runs));
    }
    tr.sampled->push_back(std::move(s));
    tr.sigma->push_back(std::move(e));
  }
  tr.metadata["runs"] = std::to_string(policy.runs);
  tr.metadata["shot_seed"] = std::to_string(policy.seed);
  return tr;
}

}  // namespace lvcm::emulator
