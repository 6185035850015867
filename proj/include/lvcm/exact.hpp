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
#include <Eigen/Sparse>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lvcm/config/ini.hpp"
#include "lvcm/errors.hpp"
#include "lvcm/hilbert.hpp"
#include "lvcm/linalg.hpp"
#include "lvcm/model.hpp"
#include "lvcm/trace.hpp"

namespace lvcm::exact {

enum class Frame { lab, interaction };

struct CutoffPolicy {
  bool adaptive = true;
  std::vector<std::size_t> fixed;
  double eps_cut = 1e-4;
  std::size_t start = 2;
  std::size_t increment = 2;
  std::size_t max_dimension = kDefaultMaxDimension;
  std::size_t max_iterations = 200;
};

struct PropagationRequest {
  LvcmSpec spec;
  std::size_t initial_state = 0;
  std::optional<Eigen::VectorXcd> initial_amplitudes{};
  std::vector<double> nbar{};
  std::vector<double> times{};
  CutoffPolicy cutoffs{};
  double eps_int = 1e-8;
  Frame frame = Frame::lab;
};

/// t_j = j * tau / points for j = 0 .. points-1.
inline std::vector<double> default_time_grid(double tau_fs = 400.0, std::size_t points = 40) {
  std::vector<double> t(points);
  for (std::size_t j = 0; j < points; ++j) t[j] = static_cast<double>(j) * tau_fs / static_cast<double>(points);
  return t;
}

inline void validate_grid(const std::vector<double>& times) {
  if (times.empty() || times.front() != 0.0) throw Error("time grid must start at 0");
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (!(times[j] > times[j - 1])) throw Error("time grid must be strictly increasing");
  }
}

/// Static pieces of the Hamiltonian on an electronic x Fock layout.
struct HamiltonianParts {
  SpaceLayout layout;
  SparseC electronic_static;           // delta (with rotating-frame shifts) x I
  std::vector<SparseC> drive;          // |lower><upper| x I per transition
  std::vector<SparseC> lowering;       // kappa_k x a_k per mode
  std::vector<SparseC> lowering_adj;   // its adjoint
  Eigen::VectorXd oscillator;          // diagonal of sum_k nu_k a_k^dag a_k
};

inline HamiltonianParts hamiltonian_parts(const LvcmSpec& spec, const SpaceLayout& layout) {
  if (layout.levels() != spec.states() || layout.mode_count() != spec.modes() || layout.qubit_count() != 0)
    throw LayoutMismatch("layout does not match the model");
  HamiltonianParts p;
  p.layout = layout;
  CMatrix el = spec.delta();
  if (spec.drive() && spec.drive()->rwa) {
    const auto lower = spec.rwa_lower_states();
    for (std::size_t i = 0; i < spec.states(); ++i) {
      if (!lower[i]) el(i, i) -= spec.drive()->carrier;
    }
  }
  p.electronic_static = FockOperator::embed(layout, 0, el).sparse();
  if (spec.drive()) {
    for (const auto& tr : spec.drive()->transitions) p.drive.push_back(electronic_operator(layout, tr.lower, tr.upper).sparse());
  }
  for (std::size_t k = 0; k < spec.modes(); ++k) {
    const SparseC op = FockOperator::embed(layout, 0, spec.kappa(k)).sparse() * annihilation(layout, k).sparse();
    p.lowering.push_back(op);
    p.lowering_adj.push_back(SparseC(op.adjoint()));
  }
  p.oscillator = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.dimension()));
  for (std::size_t i = 0; i < layout.dimension(); ++i) {
    double e = 0.0;
    for (std::size_t k = 0; k < spec.modes(); ++k) e += spec.nu(k) * static_cast<double>(layout.digit(i, layout.mode_factor(k)));
    p.oscillator(static_cast<Eigen::Index>(i)) = e;
  }
  return p;
}

/// Full Hamiltonian (rad/fs) at time t. In the interaction frame the nu_k a^dag a
/// terms are dropped and a_k carries exp(-i nu_k t).
inline FockOperator assemble_hamiltonian(const LvcmSpec& spec, const SpaceLayout& layout, Frame frame, double t) {
  const auto p = hamiltonian_parts(spec, layout);
  SparseC h = p.electronic_static;
  if (spec.drive()) {
    for (std::size_t n = 0; n < p.drive.size(); ++n) {
      const cplx c = spec.drive()->coupling(spec.drive()->transitions[n], t);
      h += c * p.drive[n] + std::conj(c) * SparseC(p.drive[n].adjoint());
    }
  }
  for (std::size_t k = 0; k < spec.modes(); ++k) {
    const cplx ph = frame == Frame::interaction ? std::exp(cplx{0.0, -spec.nu(k) * t}) : cplx{1.0, 0.0};
    h += ph * p.lowering[k] + std::conj(ph) * p.lowering_adj[k];
  }
  if (frame == Frame::lab) {
    SparseC osc(h.rows(), h.cols());
    osc.reserve(Eigen::VectorXi::Constant(h.rows(), 1));
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      if (p.oscillator(i) != 0.0) osc.insert(i, i) = p.oscillator(i);
    }
    h += osc;
  }
  h.prune(cplx{0.0, 0.0});
  return {layout, std::move(h)};
}

/// y = H(t) x without forming H(t).
inline void apply_hamiltonian(const LvcmSpec& spec, const HamiltonianParts& p, Frame frame, double t,
                              const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
  y.noalias() = p.electronic_static * x;
  if (spec.drive()) {
    for (std::size_t n = 0; n < p.drive.size(); ++n) {
      const cplx c = spec.drive()->coupling(spec.drive()->transitions[n], t);
      if (c == cplx{}) continue;
      y.noalias() += c * (p.drive[n] * x);
      y.noalias() += std::conj(c) * (p.drive[n].adjoint() * x);
    }
  }
  for (std::size_t k = 0; k < p.lowering.size(); ++k) {
    const cplx ph = frame == Frame::interaction ? std::exp(cplx{0.0, -spec.nu(k) * t}) : cplx{1.0, 0.0};
    y.noalias() += ph * (p.lowering[k] * x);
    y.noalias() += std::conj(ph) * (p.lowering_adj[k] * x);
  }
  if (frame == Frame::lab) y.array() += p.oscillator.array() * x.array();
}

/// Pure-state propagation; returns the state at every grid time.
inline std::vector<Eigen::VectorXcd> evolve_states(const LvcmSpec& spec, const SpaceLayout& layout, const Eigen::VectorXcd& psi0,
                                                   const std::vector<double>& times, Frame frame, double eps_int) {
  validate_grid(times);
  const auto parts = hamiltonian_parts(spec, layout);
  std::vector<Eigen::VectorXcd> out;
  out.reserve(times.size());
  Eigen::VectorXcd psi = psi0;
  out.push_back(psi);
  const bool stationary = frame == Frame::lab && !spec.time_dependent();
  if (stationary) {
    const SparseC h = assemble_hamiltonian(spec, layout, frame, 0.0).sparse();
    auto apply = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y.noalias() = h * x; };
    for (std::size_t j = 1; j < times.size(); ++j) {
      psi = linalg::expv_hermitian(apply, times[j] - times[j - 1], psi, std::min(1e-2 * eps_int, 1e-10));
      out.push_back(psi);
    }
    return out;
  }
  linalg::Dopri5Options opt;
  opt.rtol = 1e-3 * eps_int;
  opt.atol = 1e-3 * eps_int;
  Eigen::VectorXcd scratch(psi.size());
  linalg::Dopri5<Eigen::VectorXcd> solver(
      [&](double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        apply_hamiltonian(spec, parts, frame, t, y, scratch);
        dy = cplx{0.0, -1.0} * scratch;
      },
      opt);
  for (std::size_t j = 1; j < times.size(); ++j) {
    solver.integrate(psi, times[j - 1], times[j]);
    out.push_back(psi);
  }
  return out;
}

/// Initial mixture: electronic amplitudes times Fock product states weighted by
/// thermal occupations. Components below 1e-14 relative weight are dropped.
struct MixtureComponent {
  double weight;
  Eigen::VectorXcd psi;
};

inline std::vector<MixtureComponent> initial_mixture(const PropagationRequest& req, const SpaceLayout& layout) {
  const auto& spec = req.spec;
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(spec.states()));
  if (req.initial_amplitudes) {
    if (req.initial_amplitudes->size() != c.size()) throw Error("initial amplitude vector has wrong length");
    c = *req.initial_amplitudes;
    if (c.norm() == 0.0) throw Error("initial amplitude vector is zero");
    c /= c.norm();
  } else {
    if (req.initial_state >= spec.states()) throw IndexOutOfRange("initial electronic state out of range");
    c(static_cast<Eigen::Index>(req.initial_state)) = 1.0;
  }
  std::vector<std::vector<double>> occ;
  for (std::size_t k = 0; k < spec.modes(); ++k) {
    const double nb = k < req.nbar.size() ? req.nbar[k] : 0.0;
    occ.push_back(thermal_occupations(layout.cutoff(k), nb));
  }
  std::vector<MixtureComponent> out;
  std::vector<std::size_t> n(spec.modes(), 0);
  while (true) {
    double w = 1.0;
    for (std::size_t k = 0; k < n.size(); ++k) w *= occ[k][n[k]];
    if (w > 1e-14) {
      Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(layout.dimension()));
      std::size_t base = 0;
      for (std::size_t k = 0; k < n.size(); ++k) base += n[k] * layout.stride(layout.mode_factor(k));
      for (std::size_t i = 0; i < spec.states(); ++i) psi(static_cast<Eigen::Index>(base + i * layout.stride(0))) = c(static_cast<Eigen::Index>(i));
      out.push_back({w, std::move(psi)});
    }
    std::size_t k = 0;
    while (k < n.size() && ++n[k] == layout.cutoff(k)) n[k++] = 0;
    if (k == n.size()) break;
  }
  double total = 0.0;
  for (const auto& m : out) total += m.weight;
  for (auto& m : out) m.weight /= total;
  return out;
}

struct FixedRun {
  PopulationTrace trace;
  std::vector<double> mode_leakage;  // max over the grid, per mode
};

inline FixedRun propagate_fixed_detail(const PropagationRequest& req, const std::vector<std::size_t>& cutoffs) {
  const auto& spec = req.spec;
  if (cutoffs.size() != spec.modes()) throw LayoutMismatch("cutoff list length does not match mode count");
  const auto start = std::chrono::steady_clock::now();
  const SpaceLayout layout(0, cutoffs, spec.states(), req.cutoffs.max_dimension);
  FixedRun run;
  auto& tr = run.trace;
  tr.times = req.times;
  tr.populations.assign(req.times.size(), std::vector<double>(spec.states(), 0.0));
  tr.leakage.assign(req.times.size(), 0.0);
  std::vector<std::vector<double>> leak(req.times.size(), std::vector<double>(spec.modes(), 0.0));
  for (const auto& comp : initial_mixture(req, layout)) {
    const auto states = evolve_states(spec, layout, comp.psi, req.times, req.frame, req.eps_int);
    for (std::size_t j = 0; j < states.size(); ++j) {
      const Eigen::VectorXd diag = states[j].cwiseAbs2();
      const auto pe = factor_populations(layout, diag, 0);
      for (std::size_t i = 0; i < pe.size(); ++i) tr.populations[j][i] += comp.weight * pe[i];
      for (std::size_t k = 0; k < spec.modes(); ++k) leak[j][k] += comp.weight * factor_populations(layout, diag, layout.mode_factor(k)).back();
    }
  }
  run.mode_leakage.assign(spec.modes(), 0.0);
  for (std::size_t j = 0; j < leak.size(); ++j) {
    for (std::size_t k = 0; k < spec.modes(); ++k) {
      tr.leakage[j] = std::max(tr.leakage[j], leak[j][k]);
      run.mode_leakage[k] = std::max(run.mode_leakage[k], leak[j][k]);
    }
  }
  std::string cut;
  for (std::size_t k = 0; k < cutoffs.size(); ++k) cut += (k ? "," : "") + std::to_string(cutoffs[k]);
  tr.metadata["method"] = "exact";
  tr.metadata["cutoffs"] = cut;
  tr.metadata["frame"] = req.frame == Frame::lab ? "lab" : "interaction";
  tr.metadata["max_leakage"] = config::format_double(tr.leakage.empty() ? 0.0 : *std::max_element(tr.leakage.begin(), tr.leakage.end()));
  tr.metadata["wall_time_s"] =
      config::format_double(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return run;
}

/// Propagation at fixed cutoffs.
inline PopulationTrace propagate_fixed(const PropagationRequest& req, const std::vector<std::size_t>& cutoffs) {
  return propagate_fixed_detail(req, cutoffs).trace;
}

inline double max_population_change(const PopulationTrace& a, const PopulationTrace& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    for (std::size_t i = 0; i < a.states(); ++i) d = std::max(d, std::abs(a.populations[j][i] - b.populations[j][i]));
  }
  return d;
}

inline std::vector<double> flatten(const PopulationTrace& t) {
  std::vector<double> out;
  for (const auto& row : t.populations) out.insert(out.end(), row.begin(), row.end());
  return out;
}

/// Smallest cutoffs (searched from `start` in steps of `increment`) such that raising
/// any single mode by `increment` moves every population by less than eps_cut and the
/// top-level leakage of every mode stays below eps_cut.
inline std::vector<std::size_t> converge_cutoffs(const PropagationRequest& req, PopulationTrace* converged = nullptr) {
  const auto& pol = req.cutoffs;
  const std::size_t n = req.spec.modes();
  std::vector<std::size_t> cut(n, pol.start);
  std::optional<PopulationTrace> previous;
  auto fail = [&](const std::string& why, const PopulationTrace* last) -> ConvergenceFailure {
    return ConvergenceFailure(why, previous ? flatten(*previous) : std::vector<double>{},
                              last ? flatten(*last) : std::vector<double>{});
  };
  for (std::size_t iter = 0; iter < pol.max_iterations; ++iter) {
    FixedRun base;
    try {
      base = propagate_fixed_detail(req, cut);
    } catch (const DimensionLimitExceeded& e) {
      throw fail(std::string("cutoff search hit the dimension limit: ") + e.what(), nullptr);
    }
    std::vector<bool> raise(n, false);
    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (base.mode_leakage[k] >= pol.eps_cut) {
        raise[k] = true;
      } else {
        auto trial = cut;
        trial[k] += pol.increment;
        try {
          raise[k] = max_population_change(base.trace, propagate_fixed(req, trial)) >= pol.eps_cut;
        } catch (const DimensionLimitExceeded& e) {
          throw fail(std::string("cutoff search hit the dimension limit: ") + e.what(), &base.trace);
        }
      }
      any = any || raise[k];
    }
    if (!any) {
      if (converged) *converged = std::move(base.trace);
      return cut;
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (raise[k]) cut[k] += pol.increment;
    }
    try {
      SpaceLayout probe(0, cut, req.spec.states(), pol.max_dimension);
    } catch (const DimensionLimitExceeded& e) {
      throw fail(std::string("cutoff search hit the dimension limit: ") + e.what(), &base.trace);
    }
    previous = std::move(base.trace);
  }
  throw fail("cutoff search exceeded the iteration budget", nullptr);
}

/// Runs the request with its cutoff policy and records the cutoffs used.
inline PopulationTrace propagate(const PropagationRequest& req) {
  validate_grid(req.times);
  if (!req.cutoffs.adaptive) return propagate_fixed(req, req.cutoffs.fixed);
  PopulationTrace tr;
  converge_cutoffs(req, &tr);
  tr.metadata["eps_cut"] = config::format_double(req.cutoffs.eps_cut);
  return tr;
}

}  // namespace lvcm::exact
