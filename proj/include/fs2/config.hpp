// Copyright 2026 The fs2stream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fs2/core.hpp"

namespace fs2 {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

inline bool parse_uint(std::string_view s, std::uint64_t& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

// Flat `key = value` configuration. Lines starting with '#' are comments.
// Later assignments override earlier ones, which is how CLI flags layer on
// top of a config file.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<config>") {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw UsageError(std::string(origin) + ":" + std::to_string(line_no) +
                         ": expected key = value");
      }
      const std::string key = trim(std::string_view(t).substr(0, eq));
      if (key.empty()) {
        throw UsageError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
      }
      cfg.set(key, trim(std::string_view(t).substr(eq + 1)));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void merge(const KeyValueConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, std::string fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0;
    if (!parse_double(it->second, v)) bad(key, "expected a number");
    return v;
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    if (!parse_uint(it->second, v)) bad(key, "expected a non-negative integer");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    bad(key, "expected true or false");
  }

  // Comma-separated list of numbers. A single number broadcasts to `n`
  // entries when n > 0.
  std::vector<double> get_vector(const std::string& key, std::vector<double> fallback,
                                 std::size_t n = 0) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const auto& part : split(it->second, ',')) {
      double v = 0;
      if (!parse_double(part, v)) bad(key, "expected a comma-separated list of numbers");
      out.push_back(v);
    }
    if (n > 0 && out.size() == 1) out.assign(n, out[0]);
    if (n > 0 && out.size() != n) {
      bad(key, "expected " + std::to_string(n) + " values, got " + std::to_string(out.size()));
    }
    return out;
  }

  // Throws UsageError naming the first key that is not in `known` and does
  // not start with one of `prefixes`.
  void require_known(const std::set<std::string>& known,
                     const std::vector<std::string>& prefixes = {}) const {
    for (const auto& [k, v] : values_) {
      if (known.count(k)) continue;
      bool ok = false;
      for (const auto& p : prefixes) ok = ok || k.rfind(p, 0) == 0;
      if (!ok) throw UsageError("unknown configuration key '" + k + "'");
    }
  }

 private:
  [[noreturn]] static void bad(const std::string& key, const std::string& why) {
    throw UsageError("invalid value for key '" + key + "': " + why);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace fs2
