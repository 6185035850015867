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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "lvcm/ehrenfest.hpp"
#include "lvcm/estimator.hpp"
#include "lvcm/exact.hpp"
#include "lvcm/ion_emulator.hpp"
#include "lvcm/model.hpp"
#include "lvcm/presets.hpp"
#include "lvcm/pulse_compiler.hpp"

namespace lvcm {
namespace {

using compiler::build_schedule;
using compiler::CompileOptions;
using compiler::PulseKind;
using emulator::NoiseChannels;

CompileOptions steps(std::size_t s) {
  CompileOptions opt;
  opt.steps = s;
  return opt;
}

// --- ehrenfest -----------------------------------------------------------

TEST(Ehrenfest, WignerGroundVariance) {
  const auto spec = build_toy_model(2, 1.0);
  ehrenfest::EnsembleConfig cfg;
  Rng rng(11);
  double sq = 0.0, sp = 0.0;
  const int n = 20'000;
  for (int i = 0; i < n; ++i) {
    const auto s = ehrenfest::sample_initial(cfg, spec, rng);
    sq += s.q(0) * s.q(0);
    sp += s.p(1) * s.p(1);
  }
  EXPECT_NEAR(sq / n, 0.5, 0.02);
  EXPECT_NEAR(sp / n, 0.5, 0.02);
}

TEST(Ehrenfest, UncoupledRabi) {
  const auto spec = build_toy_model(2, 0.0);
  ehrenfest::EnsembleConfig cfg;
  cfg.trajectories = 5;
  const auto tr = ehrenfest::ensemble_average(spec, cfg, exact::default_time_grid());
  const double delta = units::ev_to_rad_per_fs(kToyDeltaEv);
  for (std::size_t r = 0; r < tr.size(); ++r) {
    const double c = std::cos(0.5 * delta * tr.times[r]);
    EXPECT_NEAR(tr.populations[r][0], c * c, 1e-8);
  }
}

TEST(Ehrenfest, ReproducibleAndSingleMember) {
  const auto spec = build_toy_model(2, 5.0);
  const auto times = exact::default_time_grid();
  ehrenfest::EnsembleConfig cfg;
  cfg.trajectories = 6;
  cfg.seed = 42;
  const auto a = ehrenfest::ensemble_average(spec, cfg, times);
  cfg.jobs = 3;
  const auto b = ehrenfest::ensemble_average(spec, cfg, times);
  EXPECT_EQ(a.populations, b.populations);
  ASSERT_TRUE(a.standard_error);

  cfg.trajectories = 1;
  const auto one = ehrenfest::ensemble_average(spec, cfg, times);
  const auto member = ehrenfest::run_member(spec, cfg, times, 0);
  for (std::size_t r = 0; r < times.size(); ++r) {
    EXPECT_NEAR(one.populations[r][0], member.populations[r][0], 1e-15);
  }
  cfg.trajectories = 0;
  EXPECT_THROW(ehrenfest::ensemble_average(spec, cfg, times), Error);
}

TEST(Ehrenfest, NormAndEnergyConserved) {
  const auto spec = build_toy_model(3, 10.0);
  ehrenfest::EnsembleConfig cfg;
  Rng rng(7);
  const auto init = ehrenfest::sample_initial(cfg, spec, rng);
  const auto res = ehrenfest::evolve_trajectory(spec, init, exact::default_time_grid());
  const double e0 = ehrenfest::mean_field_energy(spec, init);
  for (const auto& s : res.states) {
    EXPECT_NEAR(s.c.squaredNorm(), 1.0, 1e-9);
    EXPECT_NEAR(ehrenfest::mean_field_energy(spec, s), e0, 1e-8 * std::max(1.0, std::abs(e0)));
  }
}

// --- compiler ------------------------------------------------------------

TEST(Compiler, TrotterTermCounts) {
  const auto spec = build_toy_model(1, 5.0);
  const auto terms = compiler::trotterize(spec, 400.0, 3);
  std::set<std::size_t> stepset;
  for (const auto& t : terms) stepset.insert(t.step);
  EXPECT_EQ(stepset, (std::set<std::size_t>{1, 2, 3}));
  EXPECT_EQ(build_schedule(spec, {}, steps(3)).count(PulseKind::sdf), 3u);
  EXPECT_EQ(build_schedule(build_toy_model(2, 5.0), {}, steps(600)).count(PulseKind::sdf), 1200u);
}

TEST(Compiler, ZeroCouplingEmitsNoSdf) {
  const auto sch = build_schedule(build_toy_model(2, 0.0), {}, steps(10));
  EXPECT_EQ(sch.count(PulseKind::sdf), 0u);
  EXPECT_EQ(sch.count(PulseKind::ms), 0u);
}

TEST(Compiler, CompactUsesOneQubit) {
  const auto sch = build_schedule(build_toy_model(2, 5.0), {}, steps(10));
  EXPECT_EQ(sch.reg.encoding, compiler::Encoding::compact);
  EXPECT_EQ(sch.reg.total_qubits(), 1u);
  EXPECT_EQ(sch.n_ions, 2u);
}

TEST(Compiler, OneHotExchangeUsesTwoEqualMsPulses) {
  auto opt = steps(1);
  opt.encoding = compiler::Encoding::one_hot;
  const auto sch = build_schedule(build_toy_model(1, 0.0), {}, opt);
  EXPECT_EQ(sch.reg.qubits, 2u);
  std::vector<double> d;
  for (const auto& p : sch.pulses)
    if (p.kind == PulseKind::ms) d.push_back(p.duration_us);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d[0], d[1]);
}

TEST(Compiler, SdfDurationScalesWithCoupling) {
  HardwareParams hw;
  hw.sdf_min_duration_us = 0.0;
  const auto strong = build_schedule(build_toy_model(2, 30.0), hw, steps(20));
  const auto weak = build_schedule(build_toy_model(2, 7.5), hw, steps(20));
  ASSERT_EQ(strong.pulses.size(), weak.pulses.size());
  for (std::size_t i = 0; i < strong.pulses.size(); ++i) {
    if (strong.pulses[i].kind != PulseKind::sdf) continue;
    EXPECT_NEAR(strong.pulses[i].duration_us / weak.pulses[i].duration_us, 2.0, 1e-9);
  }
}

TEST(Compiler, CalibratedMeanSdfDuration) {
  EXPECT_NEAR(compiler::mean_sdf_duration_us(build_schedule(build_toy_model(2, 30.0), {}, steps(600))), 15.7, 1e-6);
  EXPECT_NEAR(compiler::mean_sdf_duration_us(build_schedule(build_toy_model(5, 30.0), {}, steps(600))), 19.0, 1e-6);
  double total = 0.0, count = 0.0;
  for (std::size_t n : {3, 4}) {
    const auto sch = build_schedule(build_toy_model(n, 30.0), {}, steps(600));
    EXPECT_EQ(sch.n_ions, 3u);
    total += compiler::total_sdf_time_us(sch);
    count += static_cast<double>(sch.count(PulseKind::sdf));
  }
  EXPECT_NEAR(total / count, 17.4, 1e-6);
}

TEST(Compiler, Infeasibility) {
  HardwareParams slow;
  slow.sideband_rabi_max_khz = 0.01;
  try {
    build_schedule(build_toy_model(2, 30.0), slow, steps(10));
    FAIL();
  } catch (const InfeasibleSchedule& e) {
    EXPECT_FALSE(e.term().empty());
  }
  EXPECT_THROW(build_schedule(build_toy_model(7, 1.0), {}, steps(10)), UnsupportedChain);
  EXPECT_THROW(build_schedule(build_toy_model(2, 1.0), {}, steps(0)), Error);
}

TEST(Compiler, FramesAreUnitQuaternions) {
  const auto sch = build_schedule(presets::vaet(), {}, steps(8));
  for (const auto& frames : sch.frame_registry)
    for (const auto& w : frames) EXPECT_NEAR(w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3], 1.0, 1e-12);
}

TEST(Compiler, OperationTimeAccumulates) {
  const auto sch = build_schedule(build_toy_model(2, 5.0), {}, steps(40));
  double prep = 0.0;
  for (const auto& p : sch.prep) prep += p.duration_us;
  for (const auto& p : compiler::correction_pulses(sch, 0)) prep += p.duration_us;
  EXPECT_DOUBLE_EQ(compiler::operation_time_until(sch, 0), prep);
  for (std::size_t s = 1; s <= 40; ++s)
    EXPECT_GT(compiler::operation_time_until(sch, s), compiler::operation_time_until(sch, s - 1));
  const auto text = compiler::schedule_to_text(sch);
  EXPECT_EQ(text.rfind("# lvcm pulse schedule v1\n", 0), 0u);
}

// --- estimator -----------------------------------------------------------

TEST(Estimator, OverheadBaseline) {
  EXPECT_NEAR(estimator::overhead_baseline_s({}, 40, 100), 17.0, 1e-12);
}

TEST(Estimator, LinearInRuns) {
  const auto sch = build_schedule(build_toy_model(2, 5.0), {}, steps(40));
  const auto a = estimator::estimate_schedule(sch, 40, 100);
  const auto b = estimator::estimate_schedule(sch, 40, 200);
  EXPECT_NEAR(b.total_s, 2.0 * a.total_s, 1e-12 * b.total_s);
  EXPECT_NEAR(a.overhead_s, 17.0, 1e-12);
  EXPECT_THROW(estimator::estimate_schedule(sch, 40, 0), Error);
}

TEST(Estimator, ScalingFitEdgeCases) {
  const auto flat = estimator::scaling_fit({1, 4, 9}, {3, 3, 3});
  EXPECT_NEAR(flat.slope, 0.0, 1e-12);
  EXPECT_EQ(flat.residual, 0.0);
  const auto line = estimator::scaling_fit({1, 4, 9, 16}, {2, 4, 6, 8});
  EXPECT_NEAR(line.slope, 2.0, 1e-12);
  EXPECT_NEAR(line.intercept, 0.0, 1e-12);
  EXPECT_THROW(estimator::scaling_fit({1, 4}, {1, 2}), Error);
}

// --- emulator ------------------------------------------------------------

TEST(Emulator, StopSteps) {
  EXPECT_EQ(emulator::stop_steps(80, 4), (std::vector<std::size_t>{0, 20, 40, 60}));
  EXPECT_EQ(estimator::measurement_steps(80, 4), (std::vector<std::size_t>{20, 40, 60, 80}));
}

TEST(Emulator, DensityPathMatchesVectorPath) {
  const auto sch = build_schedule(build_toy_model(1, 5.0), {}, steps(40));
  const auto stops = emulator::stop_steps(40, 40);
  emulator::Emulator a(sch, {8}), b(sch, {8});
  const auto psi = a.run_ideal(stops);
  const auto rho = b.run_density(stops);
  EXPECT_EQ(psi.front().populations[0], 1.0);
  for (std::size_t j = 0; j < stops.size(); ++j) {
    EXPECT_NEAR(psi[j].populations[0], rho[j].populations[0], 1e-8);
    EXPECT_NEAR(psi[j].operation_time_us, compiler::operation_time_until(sch, stops[j]), 1e-9);
  }
}

TEST(Emulator, MatchesExactOnThreeStates) {
  CMatrix d = CMatrix::Zero(3, 3);
  const double v = units::ev_to_rad_per_fs(0.03);
  d(0, 1) = d(1, 0) = v;
  d(1, 2) = d(2, 1) = v;
  d(2, 2) = units::ev_to_rad_per_fs(0.01);
  CMatrix k = CMatrix::Zero(3, 3);
  k(0, 0) = units::ev_to_rad_per_fs(0.01);
  k(2, 2) = -k(0, 0);
  const auto spec = LvcmSpec::create(d, {k}, {units::ev_to_rad_per_fs(0.09)});
  exact::PropagationRequest req{.spec = spec, .times = exact::default_time_grid()};
  req.cutoffs.adaptive = false;
  req.cutoffs.fixed = {10};
  const auto reference = exact::propagate(req);
  auto deviation = [&](std::size_t s) {
    const auto sch = build_schedule(spec, {}, steps(s));
    EXPECT_EQ(sch.reg.encoding, compiler::Encoding::one_hot);
    return compare(reference, emulator::emulate(sch, {10}, NoiseChannels::off())).max_overall;
  };
  const double coarse = deviation(400), fine = deviation(800);
  EXPECT_LT(fine, 1e-2);
  EXPECT_NEAR(coarse / fine, 2.0, 0.2);
}

TEST(Emulator, CutoffCountChecked) {
  const auto sch = build_schedule(build_toy_model(2, 5.0), {}, steps(4));
  EXPECT_THROW(emulator::Emulator(sch, {4}), LayoutMismatch);
  NoiseChannels bad;
  bad.heating_quanta_per_s = -1.0;
  EXPECT_THROW(emulator::Emulator(sch, {4, 4}, bad), Error);
}

TEST(Emulator, ShotNoise) {
  PopulationTrace tr;
  tr.times = {0.0, 1.0};
  tr.populations = {{1.0, 0.0}, {0.5, 0.5}};
  const std::vector<std::pair<std::size_t, int>> map{{0, 0}, {0, 1}};
  const auto s = emulator::measure_with_shot_noise(tr, map, {.runs = 100, .points = 2, .seed = 9});
  EXPECT_EQ((*s.sampled)[0][0], 1.0);
  EXPECT_EQ((*s.sigma)[0][0], 0.0);
  EXPECT_NEAR((*s.sampled)[1][0] + (*s.sampled)[1][1], 1.0, 1e-15);
  EXPECT_NEAR((*s.sigma)[1][0], 0.05, 0.003);
  const auto again = emulator::measure_with_shot_noise(tr, map, {.runs = 100, .points = 2, .seed = 9});
  EXPECT_EQ(*s.sampled, *again.sampled);
  EXPECT_THROW(emulator::measure_with_shot_noise(tr, map, {.runs = 0, .points = 2, .seed = 9}), Error);
}

TEST(Emulator, NoiseLowersCoherence) {
  const auto sch = build_schedule(build_toy_model(1, 1.0), {}, steps(40));
  const auto ideal = emulator::emulate(sch, {6}, NoiseChannels::off());
  NoiseChannels loud = NoiseChannels::from_hardware({});
  loud.motional_dephasing_per_ms *= 50.0;
  const auto noisy = emulator::emulate(sch, {6}, loud);
  EXPECT_GT(compare(ideal, noisy).max_overall, 1e-3);
  for (const auto& row : noisy.populations) EXPECT_NEAR(row[0] + row[1], 1.0, 1e-6);
}

}  // namespace
}  // namespace lvcm
