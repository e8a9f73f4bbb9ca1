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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/rng.hpp"
#include "memx/data/dataset.hpp"

namespace memx {

// Sizes of the clean / test / shadow splits. A size of 0 means "as large
// as possible, equal across the three splits".
struct SplitSpec {
  std::array<std::size_t, 3> sizes{0, 0, 0};
  std::uint64_t seed = 0;
  bool balance = true;
};

struct Splits {
  Dataset clean;
  Dataset test;
  Dataset shadow;
  // Source row indices backing each split.
  std::array<std::vector<std::size_t>, 3> source_rows;
};

// Builds three pairwise-disjoint splits.
//
// Balanced mode consumes one RNG stream as follows: for each class in
// ascending order, shuffle that class's source rows and deal the first
// k_clean to clean, the next k_test to test, the next k_shadow to shadow;
// then shuffle the row order of clean, test and shadow in that order.
// Unbalanced mode shuffles all rows once and cuts consecutive ranges.
inline Splits make_splits(const Dataset& source, const SplitSpec& spec) {
  const std::size_t c_count = static_cast<std::size_t>(source.class_count());
  Rng rng(spec.seed);
  std::array<std::vector<std::size_t>, 3> rows;

  if (spec.balance) {
    const auto counts = source.class_counts();
    std::size_t min_count = SIZE_MAX;
    for (std::size_t c : counts) min_count = std::min(min_count, c);

    std::array<std::size_t, 3> per_class{};
    for (int s = 0; s < 3; ++s) {
      const std::size_t size = spec.sizes[s];
      if (size == 0) continue;
      if (size % c_count != 0) {
        throw ArgumentError("make_splits: split size " + std::to_string(size) +
                            " is not divisible by " + std::to_string(c_count) +
                            " classes");
      }
      per_class[s] = size / c_count;
    }
    std::size_t fixed = 0;
    int open = 0;
    for (int s = 0; s < 3; ++s) {
      fixed += per_class[s];
      if (spec.sizes[s] == 0) ++open;
    }
    if (open > 0) {
      if (fixed > min_count) {
        throw CapacityError("make_splits: fixed split sizes exceed class capacity");
      }
      const std::size_t share = (min_count - fixed) / static_cast<std::size_t>(open);
      if (share == 0) throw CapacityError("make_splits: no room for open splits");
      for (int s = 0; s < 3; ++s) {
        if (spec.sizes[s] == 0) per_class[s] = share;
      }
    }
    const std::size_t need = per_class[0] + per_class[1] + per_class[2];
    for (std::size_t c = 0; c < c_count; ++c) {
      if (counts[c] < need) {
        throw CapacityError("make_splits: class " + std::to_string(c) + " has " +
                            std::to_string(counts[c]) + " examples, " +
                            std::to_string(need) + " required");
      }
    }
    for (std::size_t c = 0; c < c_count; ++c) {
      auto idx = source.class_indices(static_cast<int>(c));
      rng.shuffle(std::span<std::size_t>(idx));
      std::size_t pos = 0;
      for (int s = 0; s < 3; ++s) {
        for (std::size_t k = 0; k < per_class[s]; ++k) rows[s].push_back(idx[pos++]);
      }
    }
    for (auto& r : rows) rng.shuffle(std::span<std::size_t>(r));
  } else {
    std::array<std::size_t, 3> sizes = spec.sizes;
    std::size_t fixed = 0;
    int open = 0;
    for (std::size_t s : sizes) {
      fixed += s;
      if (s == 0) ++open;
    }
    if (fixed > source.size()) {
      throw CapacityError("make_splits: requested " + std::to_string(fixed) +
                          " rows from a source of " + std::to_string(source.size()));
    }
    if (open > 0) {
      const std::size_t share = (source.size() - fixed) / static_cast<std::size_t>(open);
      for (auto& s : sizes) {
        if (s == 0) s = share;
      }
    }
    std::vector<std::size_t> idx(source.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(std::span<std::size_t>(idx));
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      rows[s].assign(idx.begin() + pos, idx.begin() + pos + sizes[s]);
      pos += sizes[s];
    }
  }

  Splits out;
  out.clean = source.subset(rows[0]);
  out.test = source.subset(rows[1]);
  out.shadow = source.subset(rows[2]);
  out.source_rows = std::move(rows);
  return out;
}

}  // namespace memx
