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
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/data/dataset.hpp"

namespace memx {

namespace detail {

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(where + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

// Shortest representation that round-trips a double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Reads header-free rows `label,f1,...,fd`. Features must already lie in
// [0, 1]; out-of-range values are rejected. class_count <= 0 infers
// max(label) + 1.
inline Dataset load_csv(const std::filesystem::path& path, int class_count = 0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> data;
  std::vector<int> labels;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 2) throw FormatError(where + ": expected label and features");
    const double label = detail::parse_double(fields[0], where);
    if (label < 0 || label != static_cast<double>(static_cast<int>(label))) {
      throw FormatError(where + ": label must be a non-negative integer");
    }
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      throw FormatError(where + ": expected " + std::to_string(dim) +
                        " features, got " + std::to_string(fields.size() - 1));
    }
    for (std::size_t j = 1; j < fields.size(); ++j) {
      const double v = detail::parse_double(fields[j], where);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw FormatError(where + ": feature " + std::to_string(j) + " = " +
                          std::string(fields[j]) + " outside [0, 1]");
      }
      data.push_back(v);
    }
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty()) throw FormatError(path.string() + ": no rows");
  int c = class_count;
  if (c <= 0) {
    for (int y : labels) c = std::max(c, y + 1);
  }
  for (int y : labels) {
    if (y >= c) throw FormatError(path.string() + ": label " + std::to_string(y) +
                                  " >= class count " + std::to_string(c));
  }
  const std::size_t n = labels.size();
  return Dataset(Tensor2(n, dim, std::move(data)), std::move(labels), c);
}

inline void write_csv(const FeatureTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    out << table.labels[i];
    for (double v : table.features.row(i)) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

}  // namespace memx
