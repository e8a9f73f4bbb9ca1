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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "memx/data/binary_cache.hpp"
#include "memx/data/csv.hpp"
#include "memx/poison/poison.hpp"

namespace memx {

// CSV columns: provenance,label,original_label,source_row,x0..x{d-1}
inline void write_poison_csv(const PoisonSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "provenance,label,original_label,source_row";
  for (std::size_t j = 0; j < set.examples.feature_dim(); ++j) out << ",x" << j;
  out << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << to_string(set.provenance[i]) << ',' << set.examples.labels()[i] << ','
        << set.original_labels[i] << ',' << set.source_rows[i];
    for (double v : set.examples.features().row(i)) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

inline nlohmann::ordered_json poison_manifest(const PoisonSet& set,
                                              const PoisonRecipe& recipe) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(recipe.mode);
  j["target_class"] = recipe.target_class;
  j["budget"] = recipe.budget;
  j["epsilon"] = recipe.epsilon;
  j["seed"] = recipe.seed;
  j["balance_with_normals"] = recipe.balance_with_normals;
  j["size"] = set.size();
  std::vector<std::size_t> per_label(static_cast<std::size_t>(set.examples.class_count()), 0);
  for (int y : set.examples.labels()) ++per_label[static_cast<std::size_t>(y)];
  j["per_label_counts"] = per_label;
  std::size_t flipped = 0, collisions = 0, fillers = 0;
  for (auto p : set.provenance) {
    if (p == Provenance::flipped) ++flipped;
    if (p == Provenance::collision) ++collisions;
    if (p == Provenance::normal_filler) ++fillers;
  }
  j["provenance_counts"] = {{"flipped", flipped}, {"collision", collisions},
                            {"normal_filler", fillers}};
  if (!set.final_objectives.empty()) {
    const auto& init = set.initial_objectives;
    const auto& fin = set.final_objectives;
    const double n = static_cast<double>(fin.size());
    std::size_t improved = 0;
    for (std::size_t i = 0; i < fin.size(); ++i) improved += fin[i] < init[i];
    j["objective"] = {
        {"iterations", recipe.iterations},
        {"learning_rate", recipe.learning_rate},
        {"mean_initial", std::accumulate(init.begin(), init.end(), 0.0) / n},
        {"mean_final", std::accumulate(fin.begin(), fin.end(), 0.0) / n},
        {"max_final", *std::max_element(fin.begin(), fin.end())},
        {"improved", improved},
    };
  }
  return j;
}

// Writes poison.csv, poison.memx1 and poison_manifest.json into `dir`.
inline void export_poison(const PoisonSet& set, const PoisonRecipe& recipe,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_poison_csv(set, dir / "poison.csv");
  write_memx1(set.examples.table(), dir / "poison.memx1");
  std::ofstream m(dir / "poison_manifest.json");
  if (!m) throw IoError("cannot write " + (dir / "poison_manifest.json").string());
  m << poison_manifest(set, recipe).dump(2) << '\n';
}

}  // namespace memx
