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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/parallel.hpp"
#include "memx/core/rng.hpp"
#include "memx/data/dataset.hpp"
#include "memx/model/composed.hpp"
#include "memx/poison/collision.hpp"

namespace memx {

enum class PoisonMode : std::uint8_t { none = 0, dirty = 1, clean = 2 };

inline const char* to_string(PoisonMode m) {
  switch (m) {
    case PoisonMode::dirty: return "dirty";
    case PoisonMode::clean: return "clean";
    default: return "none";
  }
}

inline PoisonMode parse_poison_mode(std::string_view s) {
  if (s == "none") return PoisonMode::none;
  if (s == "dirty") return PoisonMode::dirty;
  if (s == "clean") return PoisonMode::clean;
  throw ConfigError("unknown poison mode '" + std::string(s) + "'");
}

struct PoisonRecipe {
  int target_class = 0;
  std::size_t budget = 0;
  PoisonMode mode = PoisonMode::dirty;
  double epsilon = 16.0 / 255.0;
  std::uint64_t seed = 0;
  bool balance_with_normals = true;
  // Collision search settings (clean mode).
  int iterations = 1000;
  double learning_rate = 0.01;
  std::size_t workers = 1;

  void validate(int class_count) const {
    if (target_class < 0 || target_class >= class_count) {
      throw ArgumentError("poison: target class " + std::to_string(target_class) +
                          " outside [0, " + std::to_string(class_count) + ")");
    }
    if (budget < 1) throw ArgumentError("poison: budget must be >= 1");
    if (mode == PoisonMode::clean && !(epsilon > 0.0 && epsilon <= 1.0)) {
      throw ArgumentError("poison: epsilon must lie in (0, 1]");
    }
  }
};

enum class Provenance : std::uint8_t { flipped = 0, collision = 1, normal_filler = 2 };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::flipped: return "flipped";
    case Provenance::collision: return "collision";
    default: return "normal-filler";
  }
}

struct PoisonSet {
  Dataset examples;
  std::vector<Provenance> provenance;
  std::vector<int> original_labels;
  std::vector<std::size_t> source_rows;   // row in the shadow set
  std::vector<std::size_t> base_rows;     // collision base row (collisions only)
  std::vector<std::vector<double>> traces;  // objective trace (collisions only)
  std::vector<double> initial_objectives;
  std::vector<double> final_objectives;

  std::size_t size() const { return examples.size(); }
};

// Label flipping: take class-t shadow rows in a seeded random order, keep
// at most `budget`, relabel each uniformly among the other classes.
//
// Stream order: shuffle of the class-t rows, then one draw per kept row.
inline PoisonSet dirty_label_poison(const Dataset& shadow, const PoisonRecipe& recipe) {
  recipe.validate(shadow.class_count());
  const int classes = shadow.class_count();
  if (classes < 2) throw ArgumentError("dirty_label_poison: need >= 2 classes");
  Rng rng(recipe.seed);
  auto rows = shadow.class_indices(recipe.target_class);
  rng.shuffle(std::span<std::size_t>(rows));
  if (rows.size() > recipe.budget) rows.resize(recipe.budget);

  PoisonSet out;
  std::vector<int> labels;
  for (std::size_t r : rows) {
    const int draw = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes - 1)));
    labels.push_back(draw < recipe.target_class ? draw : draw + 1);
    out.provenance.push_back(Provenance::flipped);
    out.original_labels.push_back(recipe.target_class);
    out.source_rows.push_back(r);
    out.base_rows.push_back(r);
  }
  const Dataset picked = shadow.subset(rows);
  out.examples = Dataset(picked.features(), std::move(labels), classes);
  return out;
}

// Per-label slot sizes: floor(budget / C) each, remainder handed out one
// by one to labels 0, 1, ...
inline std::vector<std::size_t> label_slots(std::size_t budget, int classes) {
  std::vector<std::size_t> slots(static_cast<std::size_t>(classes),
                                 budget / static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < budget % static_cast<std::size_t>(classes); ++i) ++slots[i];
  return slots;
}

// Feature-collision poisoning. For every label y != t, shadow carriers of
// label y (without replacement) are perturbed within eps so that their
// encoding approaches a class-t base (with replacement). The class-t slot
// holds unmodified class-t rows when balance_with_normals is set. Labels
// are never changed.
//
// Stream order: for y = 0..C-1 skipping t: shuffle of class-y rows, then
// one base draw per kept carrier; finally the shuffle of class-t rows for
// the fillers.
inline PoisonSet clean_label_poison(const Dataset& shadow, const PoisonRecipe& recipe,
                                    const EncoderModel& encoder,
                                    const CollisionOptions& options = {}) {
  recipe.validate(shadow.class_count());
  if (shadow.feature_dim() != encoder.input_dim) {
    throw DimensionError("clean_label_poison: shadow dim does not match encoder");
  }
  const int classes = shadow.class_count();
  const int t = recipe.target_class;
  const auto bases = shadow.class_indices(t);
  if (bases.empty()) {
    throw CapacityError("clean_label_poison: shadow has no class-" + std::to_string(t) +
                        " base samples");
  }
  const auto slots = label_slots(recipe.budget, classes);
  Rng rng(recipe.seed);

  std::vector<std::size_t> carriers;
  std::vector<std::size_t> carrier_bases;
  for (int y = 0; y < classes; ++y) {
    if (y == t) continue;
    const std::size_t want = slots[static_cast<std::size_t>(y)];
    auto rows = shadow.class_indices(y);
    if (rows.size() < want) {
      throw CapacityError("clean_label_poison: label " + std::to_string(y) + " has " +
                          std::to_string(rows.size()) + " carriers, " +
                          std::to_string(want) + " required");
    }
    rng.shuffle(std::span<std::size_t>(rows));
    for (std::size_t k = 0; k < want; ++k) {
      carriers.push_back(rows[k]);
      carrier_bases.push_back(bases[rng.below(bases.size())]);
    }
  }
  std::vector<std::size_t> fillers;
  if (recipe.balance_with_normals) {
    const std::size_t want = slots[static_cast<std::size_t>(t)];
    auto rows = bases;
    if (rows.size() < want) {
      throw CapacityError("clean_label_poison: class " + std::to_string(t) + " has " +
                          std::to_string(rows.size()) + " fillers, " +
                          std::to_string(want) + " required");
    }
    rng.shuffle(std::span<std::size_t>(rows));
    fillers.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(want));
  }

  std::vector<CollisionResult> crafted(carriers.size());
  parallel_for(carriers.size(), recipe.workers, [&](std::size_t i) {
    const auto x = shadow.features().row(carriers[i]);
    const auto b = shadow.features().row(carrier_bases[i]);
    CollisionProblem problem;
    problem.x.assign(x.begin(), x.end());
    problem.y = shadow.labels()[carriers[i]];
    problem.x_base.assign(b.begin(), b.end());
    problem.epsilon = recipe.epsilon;
    problem.iterations = recipe.iterations;
    problem.learning_rate = recipe.learning_rate;
    crafted[i] = craft_collision(problem, encoder, options);
  });

  PoisonSet out;
  const std::size_t d = shadow.feature_dim();
  const std::size_t n = carriers.size() + fillers.size();
  Tensor2 x(n, d);
  std::vector<int> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < carriers.size(); ++i) {
    std::copy(crafted[i].x_star.begin(), crafted[i].x_star.end(), x.row(i).begin());
    const int y = shadow.labels()[carriers[i]];
    labels.push_back(y);
    out.provenance.push_back(Provenance::collision);
    out.original_labels.push_back(y);
    out.source_rows.push_back(carriers[i]);
    out.base_rows.push_back(carrier_bases[i]);
    out.initial_objectives.push_back(crafted[i].initial_objective);
    out.final_objectives.push_back(crafted[i].final_objective);
    out.traces.push_back(std::move(crafted[i].trace));
  }
  for (std::size_t k = 0; k < fillers.size(); ++k) {
    const auto src = shadow.features().row(fillers[k]);
    std::copy(src.begin(), src.end(), x.row(carriers.size() + k).begin());
    labels.push_back(t);
    out.provenance.push_back(Provenance::normal_filler);
    out.original_labels.push_back(t);
    out.source_rows.push_back(fillers[k]);
    out.base_rows.push_back(fillers[k]);
  }
  out.examples = Dataset(std::move(x), std::move(labels), classes);
  return out;
}

}  // namespace memx
