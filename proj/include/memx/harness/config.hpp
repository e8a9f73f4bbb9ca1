// Copyright 2026 The memx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "memx/core/error.hpp"

namespace memx {

// Flat `key = value` configuration. Lines starting with `#` are comments;
// a `[section]` header prefixes subsequent keys with `section.`. Later
// assignments override earlier ones, which is how CLI overrides are
// applied on top of a file.
class ConfigMap {
 public:
  static ConfigMap parse(std::string_view text, const std::string& source = "<config>") {
    ConfigMap cfg;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      std::string line = trim(text.substr(pos, end - pos));
      pos = end + 1;
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = trim(line.substr(0, hash));
      if (line.empty()) continue;
      const std::string where = source + ":" + std::to_string(line_no);
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) {
          throw ConfigError(where + ": malformed section header '" + line + "'");
        }
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(where + ": empty key");
      if (!section.empty()) key = section + "." + key;
      cfg.set(key, trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static ConfigMap load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  // Applies one `key=value` override.
  void apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    }
    const std::string key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError("override with empty key");
    set(key, trim(assignment.substr(eq + 1)));
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    mark(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    mark(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return to_double(key, it->second);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    mark(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return to_int(key, it->second);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    mark(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
  }

  // Comma-separated lists; an empty value is an empty list.
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         std::vector<std::int64_t> fallback) const {
    mark(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::int64_t> out;
    for (const auto& item : split_list(it->second)) out.push_back(to_int(key, item));
    return out;
  }

  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const {
    mark(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) out.push_back(to_double(key, item));
    return out;
  }

  // Keys that were set but never read; typos surface here.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (read_.count(k) == 0) out.push_back(k);
    }
    return out;
  }

 private:
  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  }

  static std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  static double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
  }

  static std::int64_t to_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
    return out;
  }

  void mark(const std::string& key) const { read_[key] = true; }

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> read_;
};

}  // namespace memx
