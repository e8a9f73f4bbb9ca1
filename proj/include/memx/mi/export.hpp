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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memx/core/error.hpp"
#include "memx/data/csv.hpp"
#include "memx/mi/roc.hpp"

namespace memx {

inline std::string format_tau(double tau) {
  if (std::isinf(tau)) return tau > 0 ? "inf" : "-inf";
  return detail::format_double(tau);
}

inline double parse_tau(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return detail::parse_double(s, "tau");
}

// Header `tau,fpr,tpr`, one row per sweep point.
inline std::string roc_csv(const ROCReport& r) {
  std::ostringstream out;
  out << "tau,fpr,tpr\n";
  for (const auto& p : r.points) {
    out << format_tau(p.tau) << ',' << detail::format_double(p.fpr) << ','
        << detail::format_double(p.tpr) << '\n';
  }
  return out.str();
}

// Header `id,member,score,label`.
inline std::string scores_csv(std::span<const MIScore> scores) {
  std::ostringstream out;
  out << "id,member,score,label\n";
  for (const auto& s : scores) {
    out << s.id << ',' << (s.member ? 1 : 0) << ',' << detail::format_double(s.score) << ','
        << s.label << '\n';
  }
  return out.str();
}

inline std::vector<MIScore> parse_scores_csv(std::istream& in, const std::string& source) {
  std::vector<MIScore> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    const std::string where = source + ":" + std::to_string(line_no);
    if (f.size() != 4) throw FormatError(where + ": expected 4 columns");
    MIScore s;
    s.id = static_cast<std::size_t>(detail::parse_double(f[0], where));
    s.member = f[1] == "1";
    s.score = detail::parse_double(f[2], where);
    s.label = static_cast<int>(detail::parse_double(f[3], where));
    out.push_back(s);
  }
  return out;
}

inline nlohmann::ordered_json roc_summary(const ROCReport& r, std::optional<int> class_id) {
  nlohmann::ordered_json j;
  if (class_id) {
    j["class"] = *class_id;
  } else {
    j["class"] = nullptr;
  }
  j["auc"] = r.auc;
  nlohmann::ordered_json caps = nlohmann::ordered_json::object();
  for (const auto& [cap, tpr] : r.tpr_at_fpr) caps[detail::format_double(cap)] = tpr;
  j["tpr_at_fpr"] = caps;
  j["members"] = r.members;
  j["non_members"] = r.non_members;
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace memx
