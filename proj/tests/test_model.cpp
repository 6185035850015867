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
#include <random>

#include "lvcm/config/model_io.hpp"
#include "lvcm/exact.hpp"
#include "lvcm/hilbert.hpp"
#include "lvcm/model.hpp"
#include "lvcm/presets.hpp"
#include "lvcm/units.hpp"

namespace lvcm {
namespace {

using units::ev_to_rad_per_fs;

// --- units ---------------------------------------------------------------

TEST(Units, AngularFrequency) {
  EXPECT_EQ(units::to_angular_frequency({0.0, units::EnergyUnit::eV}), 0.0);
  EXPECT_DOUBLE_EQ(units::to_angular_frequency({0.6582119569, units::EnergyUnit::eV}), 1.0);
  EXPECT_NEAR(units::to_angular_frequency({0.08679, units::EnergyUnit::eV}), 0.131857, 1e-6);
}

TEST(Units, RoundTrip) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> expo(-6.0, 3.0);
  for (int i = 0; i < 10'000; ++i) {
    const double ev = std::pow(10.0, expo(gen));
    const auto back = units::to_ev(units::to_rad_per_fs({ev, units::EnergyUnit::eV}));
    EXPECT_NEAR(back, ev, 1e-12 * ev);
  }
}

// --- model ---------------------------------------------------------------

TEST(Model, ToyFrequenciesAndCoupling) {
  const auto spec = build_toy_model(2, 1.0);
  EXPECT_NEAR(units::rad_per_fs_to_ev(spec.nu(0)), 0.08679, 1e-12);
  EXPECT_NEAR(units::rad_per_fs_to_ev(spec.nu(1)), 0.09919, 1e-12);
  EXPECT_NEAR(units::rad_per_fs_to_ev(toy_coupling(spec)), 0.063382, 1e-6);
  EXPECT_DOUBLE_EQ(spec.delta(0, 1).real(), 0.5 * ev_to_rad_per_fs(kToyDeltaEv));
  EXPECT_DOUBLE_EQ(spec.kappa(0, 0, 1).real(), -spec.kappa(1, 1, 1).real());
  EXPECT_EQ(spec.delta(0, 0), cplx{});

  const auto five = build_toy_model(5, 30.0);
  const double expected[] = {0.08679, 0.08989, 0.09299, 0.09609, 0.09919};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(units::rad_per_fs_to_ev(five.nu(k)), expected[k], 1e-12);
  EXPECT_NEAR(units::rad_per_fs_to_ev(build_toy_model(1, 1.0).nu(0)), 0.08679, 1e-15);
  EXPECT_EQ(build_toy_model(2, 0.0).kappa(0, 0, 0), cplx{});
  EXPECT_THROW(build_toy_model(0, 1.0), InvalidModel);
}

TEST(Model, ReorganizationEnergy) {
  for (std::size_t n : {1, 2, 3, 5}) {
    for (double lam : {0.5, 1.0, 30.0}) {
      const auto spec = build_toy_model(n, lam);
      const double delta = ev_to_rad_per_fs(kToyDeltaEv);
      EXPECT_NEAR(reorganization_energy(spec, toy_coupling(spec)) / delta, lam, 1e-12 * lam);
    }
  }
  const auto spec = build_toy_model(3, 1.0);
  EXPECT_EQ(reorganization_energy(spec, 0.2), 4.0 * reorganization_energy(spec, 0.1));
}

TEST(Model, HermiticityIsChecked) {
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 1) = cplx{1.0, 0.5};
  d(1, 0) = cplx{1.0, 0.5};
  EXPECT_THROW(LvcmSpec::create(d, {}, {}), InvalidModel);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index m = 3;
    CMatrix a(m, m), k(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        a(i, j) = {g(gen), g(gen)};
        k(i, j) = {g(gen), g(gen)};
      }
    const CMatrix h = a + a.adjoint(), kh = k + k.adjoint();
    EXPECT_NO_THROW(LvcmSpec::create(h, {kh}, {1.0}));
    CMatrix broken = kh;
    broken(0, 1) += 0.1;
    EXPECT_THROW(LvcmSpec::create(h, {broken}, {1.0}), InvalidModel);
  }
  EXPECT_THROW(LvcmSpec::create(CMatrix::Zero(2, 2), {CMatrix::Zero(2, 2)}, {-1.0}), InvalidModel);
}

TEST(Model, ConicalIntersection) {
  const double k = ev_to_rad_per_fs(0.02), nu = ev_to_rad_per_fs(0.08);
  const auto spec = build_ci_model(k, k, nu, nu);
  EXPECT_EQ(spec.kappa(0, 1, 0), cplx(k, 0.0));
  EXPECT_EQ(spec.kappa(0, 0, 1), cplx(k, 0.0));
  EXPECT_EQ(spec.kappa(1, 1, 1), cplx(-k, 0.0));
  const auto origin = ci_adiabatic_surfaces(spec, 0, 0, 0, 0);
  EXPECT_EQ(origin.lower, origin.upper);
  const auto e = ci_adiabatic_surfaces(spec, 1, 0, 0, 0);
  EXPECT_NEAR(e.lower, nu / 2 - std::sqrt(2.0) * k, 1e-14);
  EXPECT_NEAR(e.upper, nu / 2 + std::sqrt(2.0) * k, 1e-14);
  EXPECT_THROW(ci_adiabatic_surfaces(build_toy_model(2, 1.0), 0, 0, 0, 0), InvalidModel);
  EXPECT_THROW(build_ci_model(k, k, 0.0, nu), InvalidModel);
}

TEST(Model, VaetCorrelationFlags) {
  const std::array<double, 3> nu{0.1, 0.12, 0.14};
  const auto anti = build_vaet_model(0, 0, 0.01, 0.01, 0.02, -0.02, 0.01, nu);
  EXPECT_EQ(mode_correlation(anti, 1), ModeCorrelation::anti_correlated);
  EXPECT_EQ(mode_correlation(anti, 0), ModeCorrelation::none);
  const auto same = build_vaet_model(0, 0, 0.01, 0.01, 0.02, 0.03, 0.01, nu);
  EXPECT_EQ(mode_correlation(same, 1), ModeCorrelation::correlated);
  EXPECT_EQ(anti.kappa(1, 1, 0), cplx{});
  EXPECT_EQ(anti.kappa(0, 0, 2), cplx{});
  EXPECT_THROW(build_vaet_model(0, 0, 0.01, 0, 0, 0, 0, {0.1, 0.0, 0.1}), InvalidModel);
}

TEST(Model, PletRequiresOrthogonalDipoles) {
  DriveSpec d;
  d.amplitude = 0.01;
  EXPECT_THROW(build_plet_model({0, 3, 3, 3}, {1, 0}, {1, 1}, {}, {}, d), InvalidModel);
  const auto spec = build_plet_model({0, 3, 3, 3}, {1, 0}, {0, 1}, {0.02, 0}, {0, 0.02}, d);
  EXPECT_EQ(spec.states(), 4u);
  EXPECT_EQ(spec.modes(), 0u);
  EXPECT_EQ(spec.drive()->transitions.size(), 2u);
}

TEST(ModelIo, RoundTripIsBitExact) {
  for (const auto& spec : {build_toy_model(3, 7.3), presets::ci(), presets::vaet(), presets::plet(true),
                           presets::plet(false)}) {
    const auto text = config::model_to_ini(spec);
    const auto back = config::read_model(config::IniDocument::parse(text));
    EXPECT_TRUE(back == spec) << text;
    EXPECT_EQ(config::model_to_ini(back), text);
  }
}

TEST(ModelIo, ErrorsNameKeyAndLine) {
  const std::string text = "[model]\nstates = 2\nenergy_0_ev = 0\ncoupling_0_1_ev = oops\n[modes]\ncount = 0\n";
  try {
    config::read_model(config::IniDocument::parse(text, "m.ini"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
    EXPECT_NE(std::string(e.what()).find("coupling_0_1_ev"), std::string::npos);
  }
  EXPECT_THROW(config::read_model(config::IniDocument::parse("[model]\nstates = 2\nenrgy_0_ev = 1\n")), ParseError);
  EXPECT_THROW(config::read_model(config::IniDocument::parse("[model]\nstates = 2\n[modes]\ncount = 1\n")), ParseError);
}

TEST(ModelIo, EnergiesAreReadInElectronvolts) {
  const auto spec = config::read_model(config::IniDocument::parse(
      "[model]\nstates = 2\ncoupling_0_1_ev = 0.04339500, 0\n[modes]\ncount = 1\nnu_0_ev = 0.08679\n"
      "kappa_0_0_0_ev = 0.01\n"));
  EXPECT_DOUBLE_EQ(spec.delta(0, 1).real(), ev_to_rad_per_fs(0.043395));
  EXPECT_DOUBLE_EQ(spec.nu(0), ev_to_rad_per_fs(0.08679));
}

// --- hilbert -------------------------------------------------------------

TEST(Hilbert, Annihilation) {
  const SpaceLayout two(0, {2});
  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(2, 2);
  expected(0, 1) = 1.0;
  EXPECT_TRUE(annihilation(two, 0).dense().isApprox(expected));

  const SpaceLayout layout(1, {5, 3});
  const Eigen::MatrixXcd a = annihilation(layout, 0).dense();
  const Eigen::MatrixXcd n = number(layout, 0).dense();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(n);
  std::set<long> levels;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) levels.insert(std::lround(es.eigenvalues()(i)));
  EXPECT_EQ(levels, (std::set<long>{0, 1, 2, 3, 4}));
  const Eigen::MatrixXcd comm = a * a.adjoint() - a.adjoint() * a;
  for (std::size_t i = 0; i < layout.dimension(); ++i) {
    const bool top = layout.digit(i, layout.mode_factor(0)) == 4;
    if (!top) {
      EXPECT_NEAR(std::abs(comm(i, i) - 1.0), 0.0, 1e-14);
    }
  }
  const auto local = annihilation_matrix(6);
  for (Eigen::Index m = 0; m < 6; ++m)
    for (Eigen::Index k = 0; k < 6; ++k)
      EXPECT_EQ(local(m, k), m == k - 1 ? cplx(std::sqrt(static_cast<double>(k)), 0) : cplx{});
  EXPECT_THROW(annihilation(layout, 2), IndexOutOfRange);
}

TEST(Hilbert, Pauli) {
  const SpaceLayout layout(2, {2});
  const auto x = pauli(layout, 1, PauliAxis::X).dense();
  const auto z = pauli(layout, 1, PauliAxis::Z).dense();
  const auto eye = Eigen::MatrixXcd::Identity(8, 8);
  EXPECT_TRUE((x * x).isApprox(eye));
  EXPECT_LT((x * z + z * x).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(sigma_phi(layout, 0, 0.0).dense().isApprox(pauli(layout, 0, PauliAxis::X).dense()));
  EXPECT_TRUE(sigma_phi(layout, 0, -std::numbers::pi / 2).dense().isApprox(pauli(layout, 0, PauliAxis::Y).dense()));
  EXPECT_THROW(pauli(layout, 2, PauliAxis::X), IndexOutOfRange);
}

TEST(Hilbert, EmbeddingCommutesWithProducts) {
  const SpaceLayout layout(1, {3});
  const auto x = pauli(layout, 0, PauliAxis::X);
  const auto a = annihilation(layout, 0);
  Eigen::MatrixXcd kron = Eigen::MatrixXcd::Zero(6, 6);
  const Eigen::Matrix2cd px = pauli_matrix(PauliAxis::X);
  const Eigen::MatrixXcd la = annihilation_matrix(3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) kron.block(3 * i, 3 * j, 3, 3) = px(i, j) * la;
  EXPECT_TRUE((x * a).dense().isApprox(kron));
  EXPECT_TRUE((x * a).dense().isApprox((a * x).dense()));
}

TEST(Hilbert, DimensionLimit) {
  EXPECT_THROW(SpaceLayout(11, {32, 32}, 1, 1 << 20), DimensionLimitExceeded);
  EXPECT_THROW(SpaceLayout(1, {1}), LayoutMismatch);
}

TEST(Hilbert, ThermalState) {
  const SpaceLayout layout(0, {8});
  const auto ground = thermal_mode_state(layout, 0, 0.0);
  EXPECT_EQ(ground.density()(0, 0), cplx(1.0, 0.0));
  const auto warm = thermal_mode_state(layout, 0, 0.06);
  EXPECT_NEAR(warm.density()(1, 1).real() / warm.density()(0, 0).real(), 0.06 / 1.06, 1e-14);
  EXPECT_NEAR(warm.density().trace().real(), 1.0, 1e-14);
  EXPECT_NEAR(expectation(warm, number(layout, 0)).real(), 0.06, 0.06 * 0.01);
  EXPECT_THROW(thermal_mode_state(layout, 0, -1.0), Error);
}

TEST(Hilbert, Expectation) {
  const SpaceLayout layout(1, {4});
  const auto vac = QuantumState::basis(layout, {0, 0, 0});
  EXPECT_EQ(expectation(vac, number(layout, 0)), cplx{});
  EXPECT_NEAR(expectation(thermal_mode_state(layout, 0, 0.3), FockOperator::identity(layout)).real(), 1.0, 1e-14);
  const auto x = pauli(layout, 0, PauliAxis::X) + number(layout, 0);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Random(8);
  psi.normalize();
  EXPECT_LT(std::abs(expectation(QuantumState::from_vector(layout, psi), x).imag()), 1e-12);
  EXPECT_THROW(expectation(vac, number(SpaceLayout(1, {5}), 0)), LayoutMismatch);
}

// --- exact ---------------------------------------------------------------

exact::PropagationRequest request(const LvcmSpec& spec) {
  return {.spec = spec, .times = exact::default_time_grid()};
}

TEST(Exact, HamiltonianIsHermitianAndFramesAgreeAtZero) {
  const auto spec = build_toy_model(2, 5.0);
  const SpaceLayout layout(0, {4, 3}, 2);
  const auto lab = exact::assemble_hamiltonian(spec, layout, exact::Frame::lab, 0.0);
  const auto ip = exact::assemble_hamiltonian(spec, layout, exact::Frame::interaction, 0.0);
  EXPECT_TRUE(lab.is_hermitian());
  FockOperator osc = FockOperator::zero(layout);
  for (std::size_t k = 0; k < 2; ++k) {
    auto n = number(layout, k);
    n *= cplx(spec.nu(k), 0);
    osc += n;
  }
  EXPECT_LT((lab.dense() - ip.dense() - osc.dense()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Exact, RabiLimit) {
  auto req = request(build_toy_model(2, 0.0));
  const auto tr = exact::propagate(req);
  EXPECT_EQ(tr.metadata.at("cutoffs"), "2,2");
  const double delta = ev_to_rad_per_fs(kToyDeltaEv);
  for (std::size_t r = 0; r < tr.size(); ++r) {
    const double c = std::cos(0.5 * delta * tr.times[r]);
    EXPECT_NEAR(tr.populations[r][0], c * c, 1e-8);
  }
  req.times = {0.0, std::numbers::pi / delta};
  EXPECT_NEAR(exact::propagate(req).populations[1][0], 0.0, 1e-10);
  EXPECT_NEAR(std::numbers::pi / delta, 23.8257, 1e-4);
}

TEST(Exact, NormalizationAndInitialCondition) {
  const auto tr = exact::propagate(request(build_toy_model(2, 5.0)));
  EXPECT_EQ(tr.size(), 40u);
  EXPECT_EQ(tr.populations[0][0], 1.0);
  for (const auto& row : tr.populations) EXPECT_NEAR(row[0] + row[1], 1.0, 1e-8);
}

TEST(Exact, FramesGiveTheSamePopulations) {
  auto req = request(build_toy_model(2, 5.0));
  req.cutoffs.adaptive = false;
  req.cutoffs.fixed = {10, 8};
  const auto lab = exact::propagate(req);
  req.frame = exact::Frame::interaction;
  const auto ip = exact::propagate(req);
  EXPECT_LT(compare(lab, ip).max_overall, 1e-8);
}

TEST(Exact, SignFlipSymmetry) {
  const auto spec = build_toy_model(2, 5.0);
  std::vector<CMatrix> flipped;
  for (std::size_t k = 0; k < spec.modes(); ++k) flipped.push_back(-spec.kappa(k));
  const auto mirror = LvcmSpec::create(spec.delta(), flipped, spec.frequencies());
  auto a = request(spec), b = request(mirror);
  a.cutoffs.adaptive = b.cutoffs.adaptive = false;
  a.cutoffs.fixed = b.cutoffs.fixed = {10, 8};
  EXPECT_LT(compare(exact::propagate(a), exact::propagate(b)).max_overall, 1e-8);
}

TEST(Exact, CutoffsGrowWithCoupling) {
  const auto weak = exact::converge_cutoffs(request(build_toy_model(2, 1.0)));
  const auto strong = exact::converge_cutoffs(request(build_toy_model(2, 30.0)));
  EXPECT_GT(strong[0], weak[0]);
  PopulationTrace converged;
  auto req = request(build_toy_model(2, 5.0));
  const auto cut = exact::converge_cutoffs(req, &converged);
  req.cutoffs.adaptive = false;
  req.cutoffs.fixed = cut;
  EXPECT_LT(compare(exact::propagate(req), converged).max_overall, req.cutoffs.eps_cut);
}

TEST(Exact, ConvergenceFailureCarriesIterates) {
  auto req = request(build_toy_model(2, 30.0));
  req.cutoffs.max_dimension = 200;
  try {
    exact::converge_cutoffs(req);
    FAIL();
  } catch (const ConvergenceFailure& e) {
    EXPECT_FALSE(e.last_iterate().empty());
  }
}

TEST(Exact, ThermalStartIsCloseToGround) {
  auto req = request(build_toy_model(2, 1.0));
  const auto cold = exact::propagate(req);
  req.nbar = {0.06, 0.06};
  const auto warm = exact::propagate(req);
  const double d = compare(cold, warm).max_overall;
  EXPECT_GT(d, 0.0);
  EXPECT_LT(d, 0.05);
}

TEST(Exact, CiWithoutTransferCouplingKeepsDonor) {
  const double k = ev_to_rad_per_fs(0.02), nu = ev_to_rad_per_fs(0.08);
  const auto tr = exact::propagate(request(build_ci_model(0.0, k, nu, nu)));
  for (const auto& row : tr.populations) EXPECT_NEAR(row[0], 1.0, 1e-10);
}

TEST(Exact, PletSelectionRuleAndInterference) {
  DriveSpec d = presets::plet(true).drive().value();
  d.polarization = {cplx{1, 0}, cplx{0, 0}};
  const double v = ev_to_rad_per_fs(0.02);
  const std::array<double, 4> omega{0.0, ev_to_rad_per_fs(2.0), ev_to_rad_per_fs(2.05), ev_to_rad_per_fs(1.95)};
  const auto tr = exact::propagate(request(build_plet_model(omega, {1, 0}, {0, 1}, {v, 0}, {0, 0}, d)));
  double d1 = 0.0;
  for (const auto& row : tr.populations) {
    EXPECT_LT(row[2], 1e-12);
    d1 = std::max(d1, row[1]);
  }
  EXPECT_GT(d1, 1e-3);

  d.amplitude = 0.0;
  const auto dark = exact::propagate(request(build_plet_model(omega, {1, 0}, {0, 1}, {v, 0}, {0, v}, d)));
  for (const auto& row : dark.populations) EXPECT_NEAR(row[0], 1.0, 1e-12);

  const auto left = exact::propagate(request(presets::plet(true)));
  const auto right = exact::propagate(request(presets::plet(false)));
  EXPECT_GT(compare(left, right).max_abs[3], 1e-4);
}

TEST(Trace, CsvRoundTripAndCompare) {
  const auto tr = exact::propagate(request(build_toy_model(2, 1.0)));
  const auto csv = trace_to_csv(tr);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "time_fs,P_0,P_1,leakage");
  const auto back = trace_from_csv(csv);
  EXPECT_EQ(back.populations, tr.populations);
  const auto same = compare(tr, back);
  EXPECT_EQ(same.max_overall, 0.0);
  PopulationTrace shifted = tr;
  for (auto& row : shifted.populations) row[0] += 0.125;
  EXPECT_DOUBLE_EQ(compare(tr, shifted).max_abs[0], 0.125);
  PopulationTrace shorter = tr;
  shorter.times.pop_back();
  shorter.populations.pop_back();
  EXPECT_THROW(compare(tr, shorter), GridMismatch);
}

}  // namespace
}  // namespace lvcm
