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
#include <cstdint>
#include <thread>
#include <vector>

#include "lvcm/config/ini.hpp"
#include "lvcm/errors.hpp"
#include "lvcm/linalg.hpp"
#include "lvcm/model.hpp"
#include "lvcm/rng.hpp"
#include "lvcm/trace.hpp"

namespace lvcm::ehrenfest {

enum class Sampling { wigner_ground, wigner_thermal };

struct EnsembleConfig {
  std::size_t trajectories = 1000;
  Sampling sampling = Sampling::wigner_ground;
  std::vector<double> nbar;
  std::uint64_t seed = 1;
  std::size_t initial_state = 0;
  double tolerance = 1e-12;
  unsigned jobs = 1;
};

/// Electronic amplitudes plus dimensionless mode coordinates (a + a^dag <-> sqrt(2) q).
struct TrajectoryState {
  Eigen::VectorXcd c;
  Eigen::VectorXd q;
  Eigen::VectorXd p;
};

/// q_k, p_k ~ N(0, nbar_k + 1/2); c is the initial electronic basis state.
inline TrajectoryState sample_initial(const EnsembleConfig& cfg, const LvcmSpec& spec, Rng& rng) {
  if (cfg.initial_state >= spec.states()) throw IndexOutOfRange("initial electronic state out of range");
  TrajectoryState s;
  s.c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(spec.states()));
  s.c(static_cast<Eigen::Index>(cfg.initial_state)) = 1.0;
  const auto n = static_cast<Eigen::Index>(spec.modes());
  s.q.resize(n);
  s.p.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double nb = 0.0;
    if (cfg.sampling == Sampling::wigner_thermal && static_cast<std::size_t>(k) < cfg.nbar.size()) nb = cfg.nbar[static_cast<std::size_t>(k)];
    const double sd = std::sqrt(nb + 0.5);
    s.q(k) = sd * rng.normal();
    s.p(k) = sd * rng.normal();
  }
  return s;
}

/// H_el(q, t) = delta(t) + sum_k kappa_k sqrt(2) q_k   (rad/fs).
inline CMatrix electronic_hamiltonian(const LvcmSpec& spec, const Eigen::VectorXd& q, double t) {
  CMatrix h = spec.electronic_hamiltonian(t);
  for (std::size_t k = 0; k < spec.modes(); ++k) h += std::sqrt(2.0) * q(static_cast<Eigen::Index>(k)) * spec.kappa(k);
  return h;
}

/// E = sum_k nu_k (q_k^2 + p_k^2)/2 + <c|H_el(q)|c>.
inline double mean_field_energy(const LvcmSpec& spec, const TrajectoryState& s, double t = 0.0) {
  double e = 0.0;
  for (std::size_t k = 0; k < spec.modes(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    e += 0.5 * spec.nu(k) * (s.q(kk) * s.q(kk) + s.p(kk) * s.p(kk));
  }
  return e + s.c.dot(electronic_hamiltonian(spec, s.q, t) * s.c).real();
}

struct TrajectoryResult {
  std::vector<std::vector<double>> populations;
  std::vector<TrajectoryState> states;
};

/// Mean-field equations of motion, integrated with Dopri5:
///   dc/dt = -i H_el(q) c,  dq_k/dt = nu_k p_k,  dp_k/dt = -nu_k q_k - sqrt(2) Re(c^dag kappa_k c).
inline TrajectoryResult evolve_trajectory(const LvcmSpec& spec, const TrajectoryState& init, const std::vector<double>& times,
                                          double tol = 1e-12) {
  if (times.empty()) return {};
  const auto m = static_cast<Eigen::Index>(spec.states());
  const auto n = static_cast<Eigen::Index>(spec.modes());
  Eigen::VectorXd y(2 * m + 2 * n);
  y << init.c.real(), init.c.imag(), init.q, init.p;
  const double r2 = std::sqrt(2.0);
  linalg::Dopri5Options opt;
  opt.rtol = tol;
  opt.atol = tol;
  Eigen::VectorXcd c(m), dc(m);
  linalg::Dopri5<Eigen::VectorXd> solver(
      [&](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
        c.real() = x.segment(0, m);
        c.imag() = x.segment(m, m);
        const auto q = x.segment(2 * m, n);
        const auto p = x.segment(2 * m + n, n);
        CMatrix h = spec.electronic_hamiltonian(t);
        for (Eigen::Index k = 0; k < n; ++k) h += r2 * q(k) * spec.kappa(static_cast<std::size_t>(k));
        dc = cplx{0.0, -1.0} * (h * c);
        dx.resize(x.size());
        dx.segment(0, m) = dc.real();
        dx.segment(m, m) = dc.imag();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double nu = spec.nu(static_cast<std::size_t>(k));
          dx(2 * m + k) = nu * p(k);
          dx(2 * m + n + k) = -nu * q(k) - r2 * c.dot(spec.kappa(static_cast<std::size_t>(k)) * c).real();
        }
      },
      opt);
  TrajectoryResult res;
  double t = times.front();
  for (std::size_t j = 0; j < times.size(); ++j) {
    solver.integrate(y, t, times[j]);
    t = times[j];
    TrajectoryState s;
    s.c = y.segment(0, m).cast<cplx>() + cplx{0.0, 1.0} * y.segment(m, m).cast<cplx>();
    s.q = y.segment(2 * m, n);
    s.p = y.segment(2 * m + n, n);
    std::vector<double> pop(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) pop[static_cast<std::size_t>(i)] = std::norm(s.c(i));
    res.populations.push_back(std::move(pop));
    res.states.push_back(std::move(s));
  }
  return res;
}

/// Trajectory `index` of an ensemble: seeded from (seed, index) so runs are
/// reproducible independent of scheduling.
inline TrajectoryResult run_member(const LvcmSpec& spec, const EnsembleConfig& cfg, const std::vector<double>& times,
                                   std::size_t index) {
  Rng rng(derive_seed(cfg.seed, index));
  return evolve_trajectory(spec, sample_initial(cfg, spec, rng), times, cfg.tolerance);
}

/// Ensemble mean and standard error (sample std / sqrt(R)) per grid point.
inline PopulationTrace ensemble_average(const LvcmSpec& spec, const EnsembleConfig& cfg, const std::vector<double>& times) {
  if (cfg.trajectories < 1) throw Error("ensemble needs at least one trajectory");
  const std::size_t R = cfg.trajectories;
  std::vector<std::vector<std::vector<double>>> pops(R);
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(R)));
  if (jobs == 1) {
    for (std::size_t r = 0; r < R; ++r) pops[r] = run_member(spec, cfg, times, r).populations;
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < R; r += jobs) pops[r] = run_member(spec, cfg, times, r).populations;
      });
    }
    for (auto& th : pool) th.join();
  }
  const std::size_t m = spec.states();
  PopulationTrace tr;
  tr.times = times;
  tr.leakage.assign(times.size(), 0.0);
  tr.standard_error.emplace();
  for (std::size_t j = 0; j < times.size(); ++j) {
    std::vector<double> mean(m), se(m);
    for (std::size_t i = 0; i < m; ++i) {
      CompensatedSum s;
      for (std::size_t r = 0; r < R; ++r) s.add(pops[r][j][i]);
      mean[i] = s.value() / static_cast<double>(R);
      CompensatedSum v;
      for (std::size_t r = 0; r < R; ++r) {
        const double d = pops[r][j][i] - mean[i];
        v.add(d * d);
      }
      se[i] = R > 1 ? std::sqrt(v.value() / static_cast<double>(R - 1) / static_cast<double>(R)) : 0.0;
    }
    tr.populations.push_back(std::move(mean));
    tr.standard_error->push_back(std::move(se));
  }
  tr.metadata["method"] = "ehrenfest";
  tr.metadata["trajectories"] = std::to_string(R);
  tr.metadata["seed"] = std::to_string(cfg.seed);
  tr.metadata["rng"] = "mt19937_64, splitmix64 stream seeds, Box-Muller normals";
  return tr;
}

}  // namespace lvcm::ehrenfest
