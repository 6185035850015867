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

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <complex>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lvcm/errors.hpp"

namespace lvcm::config {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

inline bool parse_double(std::string_view text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

/// Sectioned key-value document backed by Boost.PropertyTree's INI reader.
/// Keeps the source text so errors can point at a line.
class IniDocument {
 public:
  IniDocument() = default;

  static IniDocument parse(const std::string& text, std::string source = "<string>") {
    IniDocument doc;
    doc.source_ = std::move(source);
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, doc.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ParseError("", static_cast<int>(e.line()), doc.source_ + ": " + e.message());
    }
    std::istringstream lines(text);
    std::string line, section;
    int number = 0;
    while (std::getline(lines, line)) {
      ++number;
      const std::string t = trim(line);
      if (t.empty() || t[0] == ';' || t[0] == '#') continue;
      if (t.front() == '[' && t.back() == ']') {
        section = trim(std::string_view(t).substr(1, t.size() - 2));
        doc.lines_[{section, ""}] = number;
        continue;
      }
      const auto eq = t.find('=');
      if (eq != std::string::npos) doc.lines_[{section, trim(std::string_view(t).substr(0, eq))}] = number;
    }
    return doc;
  }

  static IniDocument load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("", 0, "cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  const std::string& source() const { return source_; }

  bool has_section(const std::string& section) const { return find_section(section) != nullptr; }

  bool has(const std::string& section, const std::string& key) const { return raw(section, key) != nullptr; }

  std::vector<std::string> sections() const {
    std::vector<std::string> out;
    for (const auto& kv : tree_) out.push_back(kv.first);
    return out;
  }

  std::vector<std::string> keys(const std::string& section) const {
    std::vector<std::string> out;
    if (const auto* s = find_section(section)) {
      for (const auto& kv : *s) out.push_back(kv.first);
    }
    return out;
  }

  int line_of(const std::string& section, const std::string& key) const {
    auto it = lines_.find({section, key});
    return it == lines_.end() ? 0 : it->second;
  }

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const {
    const std::string name = section.empty() ? key : section + "." + key;
    throw ParseError(name, line_of(section, key), source_ + ": " + name + ": " + what);
  }

  std::string get_string(const std::string& section, const std::string& key) const {
    const auto* v = raw(section, key);
    if (!v) fail(section, key, "missing required key");
    return trim(*v);
  }

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
    const auto* v = raw(section, key);
    return v ? trim(*v) : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    double out = 0.0;
    if (!parse_double(get_string(section, key), out)) fail(section, key, "expected a number");
    return out;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  long long get_int(const std::string& section, const std::string& key) const {
    const std::string t = get_string(section, key);
    long long out = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), out);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) fail(section, key, "expected an integer");
    return out;
  }

  long long get_int(const std::string& section, const std::string& key, long long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string t = get_string(section, key);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    fail(section, key, "expected true or false");
  }

  std::vector<double> get_doubles(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split(get_string(section, key))) {
      double v = 0.0;
      if (!parse_double(item, v)) fail(section, key, "expected a comma-separated list of numbers");
      out.push_back(v);
    }
    return out;
  }

  std::vector<long long> get_ints(const std::string& section, const std::string& key) const {
    std::vector<long long> out;
    for (double v : get_doubles(section, key)) {
      if (v != static_cast<double>(static_cast<long long>(v))) fail(section, key, "expected integers");
      out.push_back(static_cast<long long>(v));
    }
    return out;
  }

  /// Complex value written as `re, im`.
  std::complex<double> get_complex(const std::string& section, const std::string& key) const {
    const auto v = get_doubles(section, key);
    if (v.size() != 2) fail(section, key, "expected `re, im`");
    return {v[0], v[1]};
  }

  /// Rejects keys in `section` that are not in `allowed`.
  void require_known(const std::string& section, const std::set<std::string>& allowed) const {
    for (const auto& k : keys(section)) {
      if (!allowed.count(k)) fail(section, k, "unknown key");
    }
  }

 private:
  const boost::property_tree::ptree* find_section(const std::string& section) const {
    for (const auto& kv : tree_) {
      if (kv.first == section) return &kv.second;
    }
    return nullptr;
  }

  const std::string* raw(const std::string& section, const std::string& key) const {
    const auto* s = find_section(section);
    if (!s) return nullptr;
    for (const auto& kv : *s) {
      if (kv.first == key) return &kv.second.data();
    }
    return nullptr;
  }

  boost::property_tree::ptree tree_;
  std::map<std::pair<std::string, std::string>, int> lines_;
  std::string source_;
};

/// Ordered INI emitter; sections and keys appear in insertion order.
class IniWriter {
 public:
  void comment(const std::string& text) { current().push_back("# " + text); }

  void section(const std::string& name) {
    order_.push_back(name);
    body_[name];
  }

  void set(const std::string& key, const std::string& value) { current().push_back(key + " = " + value); }
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  void set(const std::string& key, long long value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, std::complex<double> value) {
    set(key, format_double(value.real()) + ", " + format_double(value.imag()));
  }
  template <class T>
  void set_list(const std::string& key, const std::vector<T>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) s += ", ";
      if constexpr (std::is_floating_point_v<T>) {
        s += format_double(values[i]);
      } else {
        s += std::to_string(values[i]);
      }
    }
    set(key, s);
  }

  std::string str() const {
    std::string out;
    for (const auto& line : preamble_) out += line + "\n";
    for (const auto& name : order_) {
      if (!out.empty()) out += "\n";
      out += "[" + name + "]\n";
      for (const auto& line : body_.at(name)) out += line + "\n";
    }
    return out;
  }

 private:
  std::vector<std::string>& current() { return order_.empty() ? preamble_ : body_[order_.back()]; }

  std::vector<std::string> preamble_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<std::string>> body_;
};

}  // namespace lvcm::config
