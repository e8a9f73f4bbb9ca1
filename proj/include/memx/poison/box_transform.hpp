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
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "memx/core/error.hpp"

namespace memx {

// Per-component box [lo, hi] = [max(0, x - eps), min(1, x + eps)].
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box around(std::span<const double> x, double eps) {
    if (!(eps > 0.0)) throw ArgumentError("Box::around: eps must be > 0");
    Box b;
    b.lo.resize(x.size());
    b.hi.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      b.lo[i] = std::max(0.0, x[i] - eps);
      b.hi[i] = std::min(1.0, x[i] + eps);
    }
    return b;
  }

  std::size_t size() const { return lo.size(); }
};

// Interior margin used when mapping a point onto w-space.
inline constexpr double kTanhMargin = 1e-6;

// x' = 0.5 (tanh(w) + 1)(hi - lo) + lo, clamped to [lo, hi] against
// rounding.
inline std::vector<double> decode(std::span<const double> w, const Box& box) {
  if (w.size() != box.size()) throw DimensionError("decode: w/box size mismatch");
  std::vector<double> x(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(box.lo[i] < box.hi[i])) throw DomainError("decode: empty box component");
    const double v = 0.5 * (std::tanh(w[i]) + 1.0) * (box.hi[i] - box.lo[i]) + box.lo[i];
    x[i] = std::clamp(v, box.lo[i], box.hi[i]);
  }
  return x;
}

// Inverse of decode. With `clamp` set, points on or outside the box are
// first projected to tanh-space [-1 + margin, 1 - margin]; otherwise they
// raise DomainError.
inline std::vector<double> encode(std::span<const double> x, const Box& box,
                                  bool clamp = true) {
  if (x.size() != box.size()) throw DimensionError("encode: x/box size mismatch");
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(box.lo[i] < box.hi[i])) throw DomainError("encode: empty box component");
    double t = 2.0 * (x[i] - box.lo[i]) / (box.hi[i] - box.lo[i]) - 1.0;
    if (clamp) {
      t = std::clamp(t, -1.0 + kTanhMargin, 1.0 - kTanhMargin);
    } else if (!(t > -1.0 && t < 1.0)) {
      throw DomainError("encode: component " + std::to_string(i) +
                        " lies on or outside the box");
    }
    w[i] = std::atanh(t);
  }
  return w;
}

// d x' / d w, componentwise.
inline std::vector<double> decode_jacobian(std::span<const double> w, const Box& box) {
  std::vector<double> j(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double t = std::tanh(w[i]);
    j[i] = 0.5 * (1.0 - t * t) * (box.hi[i] - box.lo[i]);
  }
  return j;
}

}  // namespace memx
