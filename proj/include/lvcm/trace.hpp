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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lvcm/config/ini.hpp"
#include "lvcm/errors.hpp"

namespace lvcm {

/// Electronic populations on a time grid. Rows are indexed by time.
struct PopulationTrace {
  std::vector<double> times;
  std::vector<std::vector<double>> populations;
  std::vector<double> leakage;
  std::optional<std::vector<std::vector<double>>> standard_error;
  std::optional<std::vector<std::vector<double>>> sampled;
  std::optional<std::vector<std::vector<double>>> sigma;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return times.size(); }
  std::size_t states() const { return populations.empty() ? 0 : populations.front().size(); }

  std::vector<double> column(std::size_t i) const {
    std::vector<double> out;
    for (const auto& row : populations) out.push_back(row.at(i));
    return out;
  }
};

inline std::string trace_to_csv(const PopulationTrace& tr) {
  const std::size_t m = tr.states();
  std::string out = "time_fs";
  for (std::size_t i = 0; i < m; ++i) out += ",P_" + std::to_string(i);
  out += ",leakage";
  if (tr.standard_error) {
    for (std::size_t i = 0; i < m; ++i) out += ",stderr_" + std::to_string(i);
  }
  if (tr.sampled) {
    for (std::size_t i = 0; i < m; ++i) out += ",P_" + std::to_string(i) + "_sampled,P_" + std::to_string(i) + "_sigma";
  }
  out += "\n";
  using config::format_double;
  for (std::size_t r = 0; r < tr.size(); ++r) {
    out += format_double(tr.times[r]);
    for (std::size_t i = 0; i < m; ++i) out += "," + format_double(tr.populations[r][i]);
    out += "," + format_double(r < tr.leakage.size() ? tr.leakage[r] : 0.0);
    if (tr.standard_error) {
      for (std::size_t i = 0; i < m; ++i) out += "," + format_double((*tr.standard_error)[r][i]);
    }
    if (tr.sampled) {
      for (std::size_t i = 0; i < m; ++i) out += "," + format_double((*tr.sampled)[r][i]) + "," + format_double((*tr.sigma)[r][i]);
    }
    out += "\n";
  }
  return out;
}

/// Writes through a temporary file and renames, so readers never see a partial file.
inline void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << text;
    if (!out) throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Parses a trace CSV written by trace_to_csv (extra columns are recognised by name).
inline PopulationTrace trace_from_csv(const std::string& text, const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("", 1, source + ": empty trace file");
  const auto header = config::split(line);
  if (header.empty() || header[0] != "time_fs") throw ParseError("time_fs", 1, source + ": missing time_fs column");
  std::vector<std::size_t> pop, err, samp, sig;
  std::size_t leak = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "leakage") {
      leak = c;
    } else if (h.rfind("stderr_", 0) == 0) {
      err.push_back(c);
    } else if (h.size() > 8 && h.compare(h.size() - 8, 8, "_sampled") == 0) {
      samp.push_back(c);
    } else if (h.size() > 6 && h.compare(h.size() - 6, 6, "_sigma") == 0) {
      sig.push_back(c);
    } else if (h.rfind("P_", 0) == 0) {
      pop.push_back(c);
    } else {
      throw ParseError(h, 1, source + ": unknown column");
    }
  }
  PopulationTrace tr;
  if (!err.empty()) tr.standard_error.emplace();
  if (!samp.empty()) {
    tr.sampled.emplace();
    tr.sigma.emplace();
  }
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (config::trim(line).empty()) continue;
    const auto cells = config::split(line);
    if (cells.size() != header.size()) throw ParseError("", number, source + ": wrong number of columns");
    auto num = [&](std::size_t c) {
      double v = 0.0;
      if (!config::parse_double(cells[c], v)) throw ParseError(header[c], number, source + ": not a number");
      return v;
    };
    tr.times.push_back(num(0));
    std::vector<double> row;
    for (auto c : pop) row.push_back(num(c));
    tr.populations.push_back(row);
    tr.leakage.push_back(leak ? num(leak) : 0.0);
    if (tr.standard_error) {
      std::vector<double> e;
      for (auto c : err) e.push_back(num(c));
      tr.standard_error->push_back(e);
    }
    if (tr.sampled) {
      std::vector<double> s, g;
      for (auto c : samp) s.push_back(num(c));
      for (auto c : sig) g.push_back(num(c));
      tr.sampled->push_back(s);
      tr.sigma->push_back(g);
    }
  }
  return tr;
}

inline PopulationTrace load_trace(const std::string& path) { return trace_from_csv(read_text(path), path); }

/// Per-state deviation between two traces on the same grid.
struct DeviationReport {
  std::vector<double> max_abs;
  std::vector<double> integrated;
  double max_overall = 0.0;
  std::size_t worst_state = 0;
  double worst_time = 0.0;
};

/// Max and trapezoid-integrated (fs) absolute population deviation.
inline DeviationReport compare(const PopulationTrace& a, const PopulationTrace& b, double grid_tol = 1e-9) {
  if (a.size() != b.size()) throw GridMismatch("traces have different numbers of time points");
  if (a.states() != b.states()) throw GridMismatch("traces have different numbers of states");
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (std::abs(a.times[r] - b.times[r]) > grid_tol * std::max(1.0, std::abs(a.times[r])))
      throw GridMismatch("time grids differ at row " + std::to_string(r));
  }
  DeviationReport rep;
  const std::size_t m = a.states();
  rep.max_abs.assign(m, 0.0);
  rep.integrated.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t r = 0; r < a.size(); ++r) {
      const double d = std::abs(a.populations[r][i] - b.populations[r][i]);
      if (d > rep.max_abs[i]) rep.max_abs[i] = d;
      if (d > rep.max_overall) {
        rep.max_overall = d;
        rep.worst_state = i;
        rep.worst_time = a.times[r];
      }
      if (r > 0) {
        const double prev = std::abs(a.populations[r - 1][i] - b.populations[r - 1][i]);
        rep.integrated[i] += 0.5 * (d + prev) * (a.times[r] - a.times[r - 1]);
      }
    }
  }
  return rep;
}

}  // namespace lvcm
