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

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lvcm/config/ini.hpp"
#include "lvcm/config/model_io.hpp"
#include "lvcm/ehrenfest.hpp"
#include "lvcm/errors.hpp"
#include "lvcm/estimator.hpp"
#include "lvcm/exact.hpp"
#include "lvcm/hardware.hpp"
#include "lvcm/ion_emulator.hpp"
#include "lvcm/presets.hpp"
#include "lvcm/pulse_compiler.hpp"
#include "lvcm/trace.hpp"

namespace lvcm::cli {

inline constexpr const char* kVersion = "1.0.0";

enum class Backend { exact, ehrenfest, ion_ideal, ion_noisy, compile, estimate };

inline std::string to_string(Backend b) {
  switch (b) {
    case Backend::exact: return "exact";
    case Backend::ehrenfest: return "ehrenfest";
    case Backend::ion_ideal: return "ion-ideal";
    case Backend::ion_noisy: return "ion-noisy";
    case Backend::compile: return "compile";
    default: return "estimate";
  }
}

inline std::optional<Backend> parse_backend(const std::string& s) {
  for (Backend b : {Backend::exact, Backend::ehrenfest, Backend::ion_ideal, Backend::ion_noisy, Backend::compile,
                    Backend::estimate}) {
    if (s == to_string(b)) return b;
  }
  return std::nullopt;
}

inline std::string to_string(ehrenfest::Sampling s) {
  return s == ehrenfest::Sampling::wigner_ground ? "wigner_ground" : "wigner_thermal";
}

/// Fully resolved run description. Every field is written to the metadata
/// sidecar, which reads back into an identical RunConfig.
struct RunConfig {
  Backend backend = Backend::exact;
  std::string output;
  std::string preset = "toy";  // empty when the model is given explicitly
  presets::PresetArgs preset_args;
  std::optional<LvcmSpec> model;
  std::size_t initial_state = 0;
  std::vector<double> nbar;
  unsigned jobs = 1;

  double tau_fs = 400.0;
  std::size_t points = 40;

  exact::CutoffPolicy cutoffs;
  double eps_int = 1e-8;

  std::size_t trajectories = 1000;
  ehrenfest::Sampling sampling = ehrenfest::Sampling::wigner_ground;
  double ode_tolerance = 1e-12;
  std::uint64_t ehrenfest_seed = 1;

  compiler::CompileOptions compile;

  std::vector<std::size_t> emulator_cutoffs;  // empty: searched
  std::size_t noisy_cutoff_cap = 16;
  double emulator_eps_cut = 1e-4;
  emulator::EmulatorOptions emulator;
  emulator::NoiseChannels noise;

  emulator::MeasurementPolicy measurement;
  bool shot_noise = true;

  std::vector<double> estimate_lambdas;
  std::vector<std::size_t> estimate_modes;
  std::vector<double> sweep_lambdas{1.0, 5.0, 10.0, 20.0, 30.0};
  std::vector<std::size_t> sweep_modes{2, 3, 4, 5};

  HardwareParams hardware;

  LvcmSpec spec() const { return model ? *model : presets::build(preset, preset_args); }

  std::string output_path() const {
    if (!output.empty()) return output;
    return backend == Backend::compile ? "schedule.txt" : to_string(backend) + ".csv";
  }
};

/// Command-line values; unset options leave the config untouched.
struct Flags {
  std::string config;
  std::string preset;
  double lambda_over_delta = 0.0;
  std::size_t modes = 0;
  std::string backend;
  std::string output;
  double tau_fs = 0.0;
  std::size_t points = 0;
  std::size_t steps = 0;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  std::size_t trajectories = 0;
  std::string hardware;
  std::string encoding;
  unsigned jobs = 0;
  std::size_t initial_state = 0;
  std::string cutoffs;
  bool strict = false;
  std::set<std::string> given;

  bool has(const std::string& name) const { return given.count(name) > 0; }
};

namespace detail {

using config::IniDocument;
using config::IniWriter;

template <class T>
std::vector<T> to_sizes(const IniDocument& doc, const std::string& section, const std::string& key) {
  std::vector<T> out;
  for (long long v : doc.get_ints(section, key)) {
    if (v < 0) doc.fail(section, key, "expected non-negative integers");
    out.push_back(static_cast<T>(v));
  }
  return out;
}

inline std::size_t get_size(const IniDocument& doc, const std::string& section, const std::string& key,
                            std::size_t fallback, std::size_t min = 0) {
  const long long v = doc.get_int(section, key, static_cast<long long>(fallback));
  if (v < static_cast<long long>(min)) doc.fail(section, key, "must be at least " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

inline double get_positive(const IniDocument& doc, const std::string& section, const std::string& key, double fallback) {
  const double v = doc.get_double(section, key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) doc.fail(section, key, "must be positive");
  return v;
}

inline std::vector<std::size_t> parse_cutoff_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& item : config::split(text)) {
    std::size_t v = 0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size() || v < 1)
      throw ParseError(what, 0, "expected a comma-separated list of positive integers");
    out.push_back(v);
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += config::format_double(v[i]);
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

inline const std::set<std::string>& known_sections() {
  static const std::set<std::string> s{"run",     "grid",  "model",       "modes",    "drive",    "exact",
                                       "ehrenfest", "compile", "emulator", "noise", "measurement", "estimate",
                                       "sweep",   "hardware", "diagnostics"};
  return s;
}

/// Applies the document on top of `cfg`. Hardware is read before noise so the
/// noise rates default to the hardware table.
inline void apply_document(const IniDocument& doc, RunConfig& cfg, const std::string& hardware_file) {
  for (const auto& s : doc.sections()) {
    if (!known_sections().count(s)) doc.fail(s, "", "unknown section");
  }
  const std::string run = "run";
  doc.require_known(run, {"backend", "output", "preset", "lambda_over_delta", "modes", "initial_state", "nbar",
                          "jobs", "hardware_file"});
  if (doc.has(run, "backend")) {
    const auto b = parse_backend(doc.get_string(run, "backend"));
    if (!b) doc.fail(run, "backend", "expected exact, ehrenfest, ion-ideal, ion-noisy, compile or estimate");
    cfg.backend = *b;
  }
  cfg.output = doc.get_string(run, "output", cfg.output);
  const bool explicit_model = doc.has_section("model");
  if (doc.has(run, "preset") && explicit_model) doc.fail(run, "preset", "a preset and a [model] section are exclusive");
  if (explicit_model) {
    cfg.model = config::read_model(doc);
    cfg.preset.clear();
  } else if (doc.has(run, "preset")) {
    cfg.preset = doc.get_string(run, "preset");
    cfg.model.reset();
  }
  if (!cfg.preset.empty() && std::find(presets::names().begin(), presets::names().end(), cfg.preset) == presets::names().end() &&
      cfg.preset != "plet_right")
    doc.fail(run, "preset", "unknown preset");
  cfg.preset_args.lambda_over_delta = doc.get_double(run, "lambda_over_delta", cfg.preset_args.lambda_over_delta);
  if (cfg.preset_args.lambda_over_delta < 0.0) doc.fail(run, "lambda_over_delta", "must be non-negative");
  cfg.preset_args.modes = get_size(doc, run, "modes", cfg.preset_args.modes, 1);
  cfg.initial_state = get_size(doc, run, "initial_state", cfg.initial_state);
  if (doc.has(run, "nbar")) cfg.nbar = doc.get_doubles(run, "nbar");
  cfg.jobs = static_cast<unsigned>(get_size(doc, run, "jobs", cfg.jobs, 1));

  doc.require_known("grid", {"tau_fs", "points"});
  cfg.tau_fs = get_positive(doc, "grid", "tau_fs", cfg.tau_fs);
  cfg.points = get_size(doc, "grid", "points", cfg.points, 1);

  const std::string ex = "exact";
  doc.require_known(ex, {"cutoffs", "eps_cut", "eps_int", "cutoff_start", "cutoff_increment", "max_dimension"});
  if (doc.has(ex, "cutoffs")) {
    cfg.cutoffs.fixed = to_sizes<std::size_t>(doc, ex, "cutoffs");
    cfg.cutoffs.adaptive = cfg.cutoffs.fixed.empty();
  }
  cfg.cutoffs.eps_cut = get_positive(doc, ex, "eps_cut", cfg.cutoffs.eps_cut);
  cfg.eps_int = get_positive(doc, ex, "eps_int", cfg.eps_int);
  cfg.cutoffs.start = get_size(doc, ex, "cutoff_start", cfg.cutoffs.start, 1);
  cfg.cutoffs.increment = get_size(doc, ex, "cutoff_increment", cfg.cutoffs.increment, 1);
  cfg.cutoffs.max_dimension = get_size(doc, ex, "max_dimension", cfg.cutoffs.max_dimension, 1);

  const std::string eh = "ehrenfest";
  doc.require_known(eh, {"trajectories", "sampling", "tolerance", "seed"});
  cfg.trajectories = get_size(doc, eh, "trajectories", cfg.trajectories, 1);
  if (doc.has(eh, "sampling")) {
    const std::string s = doc.get_string(eh, "sampling");
    if (s == "wigner_ground") {
      cfg.sampling = ehrenfest::Sampling::wigner_ground;
    } else if (s == "wigner_thermal") {
      cfg.sampling = ehrenfest::Sampling::wigner_thermal;
    } else {
      doc.fail(eh, "sampling", "expected wigner_ground or wigner_thermal");
    }
  }
  cfg.ode_tolerance = get_positive(doc, eh, "tolerance", cfg.ode_tolerance);
  cfg.ehrenfest_seed = static_cast<std::uint64_t>(get_size(doc, eh, "seed", cfg.ehrenfest_seed));

  const std::string co = "compile";
  doc.require_known(co, {"steps", "encoding", "term_order", "physical_rotation", "plane_tolerance"});
  cfg.compile.steps = get_size(doc, co, "steps", cfg.compile.steps, 1);
  try {
    if (doc.has(co, "encoding")) cfg.compile.encoding = compiler::parse_encoding(doc.get_string(co, "encoding"));
  } catch (const Error&) {
    doc.fail(co, "encoding", "expected automatic, compact or one_hot");
  }
  try {
    if (doc.has(co, "term_order")) cfg.compile.order = compiler::parse_order(doc.get_string(co, "term_order"));
  } catch (const Error&) {
    doc.fail(co, "term_order", "expected canonical or reversed");
  }
  cfg.compile.physical_rotation = doc.get_bool(co, "physical_rotation", cfg.compile.physical_rotation);
  cfg.compile.plane_tolerance = get_positive(doc, co, "plane_tolerance", cfg.compile.plane_tolerance);

  const std::string em = "emulator";
  doc.require_known(em, {"cutoffs", "noisy_cutoff_cap", "eps_cut", "strict", "substep_threshold", "trace_tolerance",
                         "eigen_tolerance"});
  if (doc.has(em, "cutoffs")) cfg.emulator_cutoffs = to_sizes<std::size_t>(doc, em, "cutoffs");
  cfg.noisy_cutoff_cap = get_size(doc, em, "noisy_cutoff_cap", cfg.noisy_cutoff_cap, 2);
  cfg.emulator_eps_cut = get_positive(doc, em, "eps_cut", cfg.emulator_eps_cut);
  cfg.emulator.strict = doc.get_bool(em, "strict", cfg.emulator.strict);
  cfg.emulator.substep_threshold = get_positive(doc, em, "substep_threshold", cfg.emulator.substep_threshold);
  cfg.emulator.trace_tolerance = get_positive(doc, em, "trace_tolerance", cfg.emulator.trace_tolerance);
  cfg.emulator.eigen_tolerance = get_positive(doc, em, "eigen_tolerance", cfg.emulator.eigen_tolerance);

  std::string hw_path = doc.get_string(run, "hardware_file", "");
  if (!hardware_file.empty()) hw_path = hardware_file;
  if (!hw_path.empty()) {
    if (!std::filesystem::exists(hw_path)) doc.fail(run, "hardware_file", "file not found: " + hw_path);
    cfg.hardware = load_hardware(hw_path);
  }
  cfg.hardware = read_hardware(doc, cfg.hardware);

  const std::string no = "noise";
  doc.require_known(no, {"motional_dephasing_per_ms", "heating_quanta_per_s", "laser_dephasing_per_ms",
                         "motional_dephasing", "heating", "laser_dephasing", "heating_model"});
  const auto base = emulator::NoiseChannels::from_hardware(cfg.hardware);
  if (!doc.has_section(no)) {
    cfg.noise.motional_dephasing_per_ms = base.motional_dephasing_per_ms;
    cfg.noise.heating_quanta_per_s = base.heating_quanta_per_s;
    cfg.noise.laser_dephasing_per_ms = base.laser_dephasing_per_ms;
  }
  cfg.noise.motional_dephasing_per_ms = doc.get_double(no, "motional_dephasing_per_ms", cfg.noise.motional_dephasing_per_ms);
  cfg.noise.heating_quanta_per_s = doc.get_double(no, "heating_quanta_per_s", cfg.noise.heating_quanta_per_s);
  cfg.noise.laser_dephasing_per_ms = doc.get_double(no, "laser_dephasing_per_ms", cfg.noise.laser_dephasing_per_ms);
  cfg.noise.motional_dephasing = doc.get_bool(no, "motional_dephasing", cfg.noise.motional_dephasing);
  cfg.noise.heating = doc.get_bool(no, "heating", cfg.noise.heating);
  cfg.noise.laser_dephasing = doc.get_bool(no, "laser_dephasing", cfg.noise.laser_dephasing);
  try {
    if (doc.has(no, "heating_model")) cfg.noise.heating_model = emulator::parse_heating_model(doc.get_string(no, "heating_model"));
    cfg.noise.validate();
  } catch (const Error& e) {
    doc.fail(no, "heating_model", e.what());
  }

  const std::string me = "measurement";
  doc.require_known(me, {"runs", "seed", "shot_noise"});
  cfg.measurement.runs = get_size(doc, me, "runs", cfg.measurement.runs, 1);
  cfg.measurement.seed = static_cast<std::uint64_t>(get_size(doc, me, "seed", cfg.measurement.seed));
  cfg.shot_noise = doc.get_bool(me, "shot_noise", cfg.shot_noise);

  doc.require_known("estimate", {"lambda_over_delta", "modes"});
  if (doc.has("estimate", "lambda_over_delta")) cfg.estimate_lambdas = doc.get_doubles("estimate", "lambda_over_delta");
  if (doc.has("estimate", "modes")) cfg.estimate_modes = to_sizes<std::size_t>(doc, "estimate", "modes");
  if (cfg.estimate_lambdas.empty() != cfg.estimate_modes.empty())
    doc.fail("estimate", "modes", "lambda_over_delta and modes must be given together");

  doc.require_known("sweep", {"lambda_over_delta", "modes"});
  if (doc.has("sweep", "lambda_over_delta")) cfg.sweep_lambdas = doc.get_doubles("sweep", "lambda_over_delta");
  if (doc.has("sweep", "modes")) cfg.sweep_modes = to_sizes<std::size_t>(doc, "sweep", "modes");
}

}  // namespace detail

/// Defaults, then the config document, then command-line flags.
inline RunConfig resolve(const config::IniDocument* doc, const Flags& f) {
  RunConfig cfg;
  const std::string hw = f.has("hardware") ? f.hardware : "";
  if (doc) {
    detail::apply_document(*doc, cfg, hw);
  } else {
    if (!hw.empty()) {
      if (!std::filesystem::exists(hw)) throw ParseError("--hardware", 0, "hardware file not found: " + hw);
      cfg.hardware = load_hardware(hw);
    }
    const auto base = emulator::NoiseChannels::from_hardware(cfg.hardware);
    cfg.noise.motional_dephasing_per_ms = base.motional_dephasing_per_ms;
    cfg.noise.heating_quanta_per_s = base.heating_quanta_per_s;
    cfg.noise.laser_dephasing_per_ms = base.laser_dephasing_per_ms;
  }
  if (f.has("backend")) {
    const auto b = parse_backend(f.backend);
    if (!b) throw ParseError("--backend", 0, "unknown backend " + f.backend);
    cfg.backend = *b;
  }
  if (f.has("preset")) {
    if (f.preset != "plet_right" &&
        std::find(presets::names().begin(), presets::names().end(), f.preset) == presets::names().end())
      throw ParseError("--preset", 0, "unknown preset " + f.preset);
    cfg.preset = f.preset;
    cfg.model.reset();
  }
  if (f.has("lambda-over-delta") || f.has("modes")) {
    if (cfg.preset.empty()) throw ParseError("--lambda-over-delta", 0, "preset arguments need a preset model");
    if (f.has("lambda-over-delta")) {
      if (f.lambda_over_delta < 0) throw ParseError("--lambda-over-delta", 0, "must be non-negative");
      cfg.preset_args.lambda_over_delta = f.lambda_over_delta;
    }
    if (f.has("modes")) {
      if (f.modes < 1) throw ParseError("--modes", 0, "must be at least 1");
      cfg.preset_args.modes = f.modes;
    }
  }
  if (f.has("output")) cfg.output = f.output;
  if (f.has("tau-fs")) {
    if (!(f.tau_fs > 0)) throw ParseError("--tau-fs", 0, "must be positive");
    cfg.tau_fs = f.tau_fs;
  }
  if (f.has("points")) {
    if (f.points < 1) throw ParseError("--points", 0, "must be at least 1");
    cfg.points = f.points;
  }
  if (f.has("steps")) {
    if (f.steps < 1) throw ParseError("--steps", 0, "must be at least 1");
    cfg.compile.steps = f.steps;
  }
  if (f.has("runs")) {
    if (f.runs < 1) throw ParseError("--runs", 0, "must be at least 1");
    cfg.measurement.runs = f.runs;
  }
  if (f.has("seed")) {
    cfg.measurement.seed = f.seed;
    cfg.ehrenfest_seed = f.seed;
  }
  if (f.has("trajectories")) {
    if (f.trajectories < 1) throw ParseError("--trajectories", 0, "must be at least 1");
    cfg.trajectories = f.trajectories;
  }
  if (f.has("encoding")) {
    try {
      cfg.compile.encoding = compiler::parse_encoding(f.encoding);
    } catch (const Error& e) {
      throw ParseError("--encoding", 0, e.what());
    }
  }
  if (f.has("jobs")) cfg.jobs = std::max(1u, f.jobs);
  if (f.has("initial-state")) cfg.initial_state = f.initial_state;
  if (f.has("cutoffs")) {
    const auto c = detail::parse_cutoff_list(f.cutoffs, "--cutoffs");
    cfg.cutoffs.fixed = c;
    cfg.cutoffs.adaptive = c.empty();
    cfg.emulator_cutoffs = c;
  }
  if (f.has("strict")) cfg.emulator.strict = f.strict;
  if (cfg.backend == Backend::estimate && cfg.estimate_lambdas.empty() && cfg.preset == "toy") {
    cfg.estimate_lambdas = {cfg.preset_args.lambda_over_delta};
    cfg.estimate_modes = {cfg.preset_args.modes};
  }
  return cfg;
}

/// Resolved configuration as INI text. The model is always written explicitly.
inline void write_config(config::IniWriter& w, const RunConfig& cfg) {
  using config::format_double;
  w.comment("lvcm " + std::string(kVersion) + " resolved run configuration");
  if (!cfg.preset.empty()) {
    w.comment("model from preset " + cfg.preset + " (lambda_over_delta " +
              format_double(cfg.preset_args.lambda_over_delta) + ", modes " + std::to_string(cfg.preset_args.modes) + ")");
  }
  w.section("run");
  w.set("backend", to_string(cfg.backend));
  w.set("output", cfg.output_path());
  w.set("initial_state", cfg.initial_state);
  w.set_list("nbar", cfg.nbar);
  w.set("jobs", static_cast<std::size_t>(cfg.jobs));
  w.section("grid");
  w.set("tau_fs", cfg.tau_fs);
  w.set("points", cfg.points);
  config::write_model(w, cfg.spec());
  w.section("exact");
  w.set_list("cutoffs", cfg.cutoffs.adaptive ? std::vector<std::size_t>{} : cfg.cutoffs.fixed);
  w.set("eps_cut", cfg.cutoffs.eps_cut);
  w.set("eps_int", cfg.eps_int);
  w.set("cutoff_start", cfg.cutoffs.start);
  w.set("cutoff_increment", cfg.cutoffs.increment);
  w.set("max_dimension", cfg.cutoffs.max_dimension);
  w.section("ehrenfest");
  w.set("trajectories", cfg.trajectories);
  w.set("sampling", to_string(cfg.sampling));
  w.set("tolerance", cfg.ode_tolerance);
  w.set("seed", static_cast<std::size_t>(cfg.ehrenfest_seed));
  w.section("compile");
  w.set("steps", cfg.compile.steps);
  w.set("encoding", compiler::to_string(cfg.compile.encoding));
  w.set("term_order", compiler::to_string(cfg.compile.order));
  w.set("physical_rotation", cfg.compile.physical_rotation);
  w.set("plane_tolerance", cfg.compile.plane_tolerance);
  w.section("emulator");
  w.set_list("cutoffs", cfg.emulator_cutoffs);
  w.set("noisy_cutoff_cap", cfg.noisy_cutoff_cap);
  w.set("eps_cut", cfg.emulator_eps_cut);
  w.set("strict", cfg.emulator.strict);
  w.set("substep_threshold", cfg.emulator.substep_threshold);
  w.set("trace_tolerance", cfg.emulator.trace_tolerance);
  w.set("eigen_tolerance", cfg.emulator.eigen_tolerance);
  w.section("noise");
  w.set("motional_dephasing_per_ms", cfg.noise.motional_dephasing_per_ms);
  w.set("heating_quanta_per_s", cfg.noise.heating_quanta_per_s);
  w.set("laser_dephasing_per_ms", cfg.noise.laser_dephasing_per_ms);
  w.set("motional_dephasing", cfg.noise.motional_dephasing);
  w.set("heating", cfg.noise.heating);
  w.set("laser_dephasing", cfg.noise.laser_dephasing);
  w.set("heating_model", emulator::to_string(cfg.noise.heating_model));
  w.section("measurement");
  w.set("runs", cfg.measurement.runs);
  w.set("seed", static_cast<std::size_t>(cfg.measurement.seed));
  w.set("shot_noise", cfg.shot_noise);
  w.section("estimate");
  w.set_list("lambda_over_delta", cfg.estimate_lambdas);
  w.set_list("modes", cfg.estimate_modes);
  w.section("sweep");
  w.set_list("lambda_over_delta", cfg.sweep_lambdas);
  w.set_list("modes", cfg.sweep_modes);
  write_hardware(w, cfg.hardware);
}

inline std::string config_to_ini(const RunConfig& cfg) {
  config::IniWriter w;
  write_config(w, cfg);
  return w.str();
}

struct RunOutput {
  std::string text;
  std::map<std::string, std::string> diagnostics;
};

/// Ideal-emulator cutoffs: start from the converged exact cutoffs, then raise
/// modes whose top Fock level is populated by the Trotterized state.
inline std::vector<std::size_t> emulator_cutoffs(const RunConfig& cfg, const LvcmSpec& spec,
                                                 const compiler::PulseSchedule& sch) {
  if (!cfg.emulator_cutoffs.empty()) {
    if (cfg.emulator_cutoffs.size() != spec.modes()) throw ParseError("emulator.cutoffs", 0, "one cutoff per mode expected");
    return cfg.emulator_cutoffs;
  }
  if (spec.modes() == 0) return {};
  exact::PropagationRequest req{spec, cfg.initial_state, std::nullopt, {}, exact::default_time_grid(cfg.tau_fs, cfg.points),
                                cfg.cutoffs, cfg.eps_int};
  req.cutoffs.adaptive = true;
  auto cut = exact::converge_cutoffs(req);
  return emulator::converge_ideal_cutoffs(sch, cut, cfg.points, cfg.emulator_eps_cut, 4, cfg.cutoffs.max_dimension);
}

inline RunOutput execute(const RunConfig& cfg) {
  RunOutput out;
  auto& diag = out.diagnostics;
  const auto started = std::chrono::steady_clock::now();
  if (cfg.backend == Backend::estimate && !cfg.estimate_lambdas.empty()) {
    estimator::ExperimentPlan plan;
    plan.lambda_over_delta = cfg.estimate_lambdas;
    plan.modes = cfg.estimate_modes;
    plan.points = cfg.points;
    plan.runs = cfg.measurement.runs;
    plan.hardware = cfg.hardware;
    plan.compile = cfg.compile;
    plan.compile.tau_fs = cfg.tau_fs;
    plan.compile.initial_state = cfg.initial_state;
    const auto rows = estimator::experimental_time(plan);
    out.text = estimator::estimate_to_csv(rows);
    for (std::size_t n : plan.modes) {
      std::vector<estimator::EstimateRow> sub;
      for (const auto& r : rows) {
        if (r.modes == n) sub.push_back(r);
      }
      if (sub.size() >= 3) {
        try {
          const auto fit = estimator::scaling_fit(sub);
          diag["fit_n" + std::to_string(n)] = "slope " + config::format_double(fit.slope) + " intercept " +
                                              config::format_double(fit.intercept) + " residual " +
                                              config::format_double(fit.residual);
        } catch (const Error&) {
        }
      }
    }
    diag["method"] = "estimate";
    return out;
  }

  const LvcmSpec spec = cfg.spec();
  if (cfg.initial_state >= spec.states()) throw ParseError("run.initial_state", 0, "initial state out of range");
  const auto times = exact::default_time_grid(cfg.tau_fs, cfg.points);
  PopulationTrace tr;
  switch (cfg.backend) {
    case Backend::exact: {
      exact::PropagationRequest req{spec, cfg.initial_state, std::nullopt, cfg.nbar, times, cfg.cutoffs, cfg.eps_int};
      tr = exact::propagate(req);
      break;
    }
    case Backend::ehrenfest: {
      ehrenfest::EnsembleConfig ec;
      ec.trajectories = cfg.trajectories;
      ec.sampling = cfg.sampling;
      ec.nbar = cfg.nbar;
      ec.seed = cfg.ehrenfest_seed;
      ec.initial_state = cfg.initial_state;
      ec.tolerance = cfg.ode_tolerance;
      ec.jobs = cfg.jobs;
      tr = ehrenfest::ensemble_average(spec, ec, times);
      break;
    }
    case Backend::compile:
    case Backend::estimate:
    case Backend::ion_ideal:
    case Backend::ion_noisy: {
      compiler::CompileOptions opt = cfg.compile;
      opt.tau_fs = cfg.tau_fs;
      opt.initial_state = cfg.initial_state;
      const auto sch = compiler::build_schedule(spec, cfg.hardware, opt);
      diag["n_ions"] = std::to_string(sch.n_ions);
      diag["encoding"] = compiler::to_string(sch.reg.encoding);
      diag["operation_time_us"] = config::format_double(compiler::operation_time_us(sch));
      if (cfg.backend == Backend::compile) {
        out.text = compiler::schedule_to_text(sch);
        diag["method"] = "compile";
        return out;
      }
      if (cfg.backend == Backend::estimate) {
        out.text = estimator::estimate_to_csv({estimator::estimate_schedule(sch, cfg.points, cfg.measurement.runs)});
        diag["method"] = "estimate";
        return out;
      }
      for (double n : cfg.nbar) {
        if (n != 0.0) throw ParseError("run.nbar", 0, "ion backends start from the motional ground state");
      }
      auto cut = emulator_cutoffs(cfg, spec, sch);
      emulator::NoiseChannels noise = emulator::NoiseChannels::off();
      if (cfg.backend == Backend::ion_noisy) {
        noise = cfg.noise;
        if (cfg.emulator_cutoffs.empty()) {
          for (auto& c : cut) c = std::min(c, cfg.noisy_cutoff_cap);
        }
      }
      tr = emulator::emulate(sch, cut, noise, cfg.points, cfg.emulator);
      if (cfg.shot_noise) {
        emulator::MeasurementPolicy policy = cfg.measurement;
        policy.points = cfg.points;
        tr = emulator::measure_with_shot_noise(std::move(tr), sch.reg.measurement, policy);
      }
      break;
    }
  }
  out.text = trace_to_csv(tr);
  for (const auto& [k, v] : tr.metadata) diag[k] = v;
  diag["wall_time_s"] = config::format_double(
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  return out;
}

inline std::string sidecar_path(const std::string& output) { return output + ".meta.ini"; }

/// Runs one configuration and writes the output plus its metadata sidecar.
inline void run_and_write(const RunConfig& cfg) {
  const RunOutput out = execute(cfg);
  const std::string path = cfg.output_path();
  if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  write_text_atomic(path, out.text);
  config::IniWriter w;
  write_config(w, cfg);
  w.section("diagnostics");
  w.set("version", kVersion);
  for (const auto& [k, v] : out.diagnostics) w.set(k, v);
  write_text_atomic(sidecar_path(path), w.str());
}

/// Toy-model grid; one output per point, fanned out to `cfg.jobs` workers.
inline int sweep(const RunConfig& base, std::ostream& log) {
  if (base.preset != "toy") throw ParseError("run.preset", 0, "sweeps run over the toy preset grid");
  const std::string dir = base.output.empty() ? "sweep" : base.output;
  std::filesystem::create_directories(dir);
  std::vector<RunConfig> points;
  for (std::size_t n : base.sweep_modes) {
    for (double lam : base.sweep_lambdas) {
      RunConfig c = base;
      c.preset_args = {lam, n};
      c.jobs = 1;
      if (c.backend == Backend::estimate) {
        c.estimate_lambdas = {lam};
        c.estimate_modes = {n};
      }
      const std::string ext = c.backend == Backend::compile ? ".txt" : ".csv";
      c.output = (std::filesystem::path(dir) / ("toy_l" + config::format_double(lam) + "_n" + std::to_string(n) + "_" +
                                                to_string(c.backend) + ext))
                     .string();
      points.push_back(std::move(c));
    }
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  int status = 0;
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        run_and_write(points[i]);
        std::lock_guard<std::mutex> lock(mu);
        log << "wrote " << points[i].output << "\n";
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        log << "failed " << points[i].output << ": " << e.what() << "\n";
        if (status == 0) status = 1;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned workers = std::max(1u, std::min<unsigned>(base.jobs, static_cast<unsigned>(points.size())));
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return status;
}

inline void print_report(std::ostream& os, const DeviationReport& rep, double threshold) {
  for (std::size_t i = 0; i < rep.max_abs.size(); ++i) {
    os << "state " << i << " max " << config::format_double(rep.max_abs[i]) << " integrated_fs "
       << config::format_double(rep.integrated[i]) << "\n";
  }
  os << "max_overall " << config::format_double(rep.max_overall) << " state " << rep.worst_state << " time_fs "
     << config::format_double(rep.worst_time) << "\n";
  if (rep.max_overall > threshold) {
    os << "FLAG max deviation " << config::format_double(rep.max_overall) << " exceeds "
       << config::format_double(threshold) << "\n";
  } else {
    os << "OK max deviation within " << config::format_double(threshold) << "\n";
  }
}

inline void add_run_flags(CLI::App& cmd, Flags& f) {
  auto track = [&f](CLI::Option* o, const std::string& name) {
    o->each([&f, name](const std::string&) { f.given.insert(name); });
  };
  track(cmd.add_option("--config", f.config, "INI run configuration (a metadata sidecar works too)"), "config");
  track(cmd.add_option("--preset", f.preset, "toy, ci, vaet, plet or plet_right"), "preset");
  track(cmd.add_option("--lambda-over-delta", f.lambda_over_delta, "toy reorganization energy in units of Delta"),
        "lambda-over-delta");
  track(cmd.add_option("--modes", f.modes, "toy mode count"), "modes");
  track(cmd.add_option("--backend", f.backend, "exact, ehrenfest, ion-ideal, ion-noisy, compile or estimate"), "backend");
  track(cmd.add_option("--output,-o", f.output, "output path (directory for sweep)"), "output");
  track(cmd.add_option("--tau-fs", f.tau_fs, "simulated duration in fs"), "tau-fs");
  track(cmd.add_option("--points", f.points, "time points"), "points");
  track(cmd.add_option("--steps", f.steps, "Trotter steps S"), "steps");
  track(cmd.add_option("--runs", f.runs, "experimental runs R per time point"), "runs");
  track(cmd.add_option("--seed", f.seed, "seed for Ehrenfest sampling and shot noise"), "seed");
  track(cmd.add_option("--trajectories", f.trajectories, "Ehrenfest trajectories"), "trajectories");
  track(cmd.add_option("--hardware", f.hardware, "INI file with a [hardware] section"), "hardware");
  track(cmd.add_option("--encoding", f.encoding, "automatic, compact or one_hot"), "encoding");
  track(cmd.add_option("--jobs,-j", f.jobs, "worker threads"), "jobs");
  track(cmd.add_option("--initial-state", f.initial_state, "initially populated electronic state"), "initial-state");
  track(cmd.add_option("--cutoffs", f.cutoffs, "fixed Fock cutoffs, comma separated"), "cutoffs");
  track(cmd.add_flag("--strict", f.strict, "positivity check after every pulse"), "strict");
}

inline RunConfig load_config(const Flags& f) {
  if (f.has("config")) {
    const auto doc = config::IniDocument::load(f.config);
    return resolve(&doc, f);
  }
  return resolve(nullptr, f);
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args.front() == "--") {
    args.front() = "run";
  } else if (!args.empty() && args.front().size() > 1 && args.front()[0] == '-' && args.front() != "--help" &&
             args.front() != "-h" && args.front() != "--version") {
    args.insert(args.begin(), "run");
  }
  std::reverse(args.begin(), args.end());

  CLI::App app{"Linear vibronic coupling model workbench"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Flags run_f, compile_f, estimate_f, sweep_f;
  auto* run = app.add_subcommand("run", "propagate one model with one backend");
  add_run_flags(*run, run_f);
  auto* sw = app.add_subcommand("sweep", "run the toy grid, one output per point");
  add_run_flags(*sw, sweep_f);
  auto* comp = app.add_subcommand("compile", "emit the pulse schedule");
  add_run_flags(*comp, compile_f);
  auto* est = app.add_subcommand("estimate", "experimental-time estimate");
  add_run_flags(*est, estimate_f);
  std::string file_a, file_b;
  double threshold = 0.1;
  auto* cmp = app.add_subcommand("compare", "per-state deviation between two trace CSVs");
  cmp->add_option("a", file_a, "first trace")->required();
  cmp->add_option("b", file_b, "second trace")->required();
  cmp->add_option("--threshold", threshold, "flag deviations above this value");

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (cmp->parsed()) {
      print_report(out, compare(load_trace(file_a), load_trace(file_b)), threshold);
      return 0;
    }
    if (sw->parsed()) return sweep(load_config(sweep_f), err);
    Flags f = run->parsed() ? run_f : comp->parsed() ? compile_f : estimate_f;
    if (comp->parsed() || est->parsed()) {
      if (f.has("backend")) throw ParseError("--backend", 0, "the subcommand fixes the backend");
      f.backend = comp->parsed() ? "compile" : "estimate";
      f.given.insert("backend");
    }
    const RunConfig cfg = load_config(f);
    run_and_write(cfg);
    out << "wrote " << cfg.output_path() << " and " << sidecar_path(cfg.output_path()) << "\n";
    return 0;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConvergenceFailure& e) {
    err << "convergence failure: " << e.what() << "\n";
    return 3;
  } catch (const InfeasibleSchedule& e) {
    err << "infeasible schedule: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lvcm::cli
