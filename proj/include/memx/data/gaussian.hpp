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
#include <cstdint>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/rng.hpp"
#include "memx/data/dataset.hpp"

namespace memx {

struct GaussianSpec {
  int classes = 10;
  std::size_t dim = 32;
  std::size_t per_class = 600;
  double spread = 0.08;
  std::uint64_t seed = 0;
  // Added to every class center before sampling; lets a second generator
  // with the same seed produce a shifted ("foreign") distribution.
  double center_shift = 0.0;
};

// Isotropic Gaussian blobs with centers drawn uniformly from
// [0.25, 0.75]^d, clamped to [0, 1]. Rows are class-major.
//
// Stream order: all centers (class-major), then all samples (class-major,
// coordinate-minor).
inline Dataset gen_gaussian(const GaussianSpec& spec) {
  if (spec.classes < 2) throw ArgumentError("gen_gaussian: need >= 2 classes");
  if (spec.dim < 2) throw ArgumentError("gen_gaussian: need dim >= 2");
  if (spec.spread < 0.0) throw ArgumentError("gen_gaussian: spread must be >= 0");

  Rng rng(spec.seed);
  const std::size_t c_count = static_cast<std::size_t>(spec.classes);
  std::vector<double> centers(c_count * spec.dim);
  for (double& v : centers) v = rng.uniform(0.25, 0.75) + spec.center_shift;

  const std::size_t n = c_count * spec.per_class;
  Tensor2 x(n, spec.dim);
  std::vector<int> y(n);
  std::size_t row = 0;
  for (std::size_t c = 0; c < c_count; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i, ++row) {
      y[row] = static_cast<int>(c);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        const double v = centers[c * spec.dim + j] + spec.spread * rng.normal();
        x(row, j) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return Dataset(std::move(x), std::move(y), spec.classes);
}

}  // namespace memx
