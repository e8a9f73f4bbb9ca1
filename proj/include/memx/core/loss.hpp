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
#include "memx/core/tensor.hpp"

namespace memx {

// Probabilities are clipped into [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-12;

inline double clip_probability(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

// Row-wise softmax with max subtraction.
inline Tensor2 softmax_rows(const Tensor2& logits) {
  Tensor2 p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    auto out = p.row(r);
    for (std::size_t c = 0; c < z.size(); ++c) {
      out[c] = std::exp(z[c] - zmax);
      sum += out[c];
    }
    for (double& v : out) v /= sum;
  }
  return p;
}

struct SoftmaxXent {
  double loss = 0.0;        // mean cross-entropy over the batch
  Tensor2 probabilities;    // unclipped softmax rows
  Tensor2 grad_logits;      // (p - onehot) / batch
};

inline SoftmaxXent softmax_xent(const Tensor2& logits,
                                std::span<const int> labels) {
  if (logits.rows() == 0) throw ArgumentError("softmax_xent: empty batch");
  if (labels.size() != logits.rows()) {
    throw DimensionError("softmax_xent: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(logits.rows()) +
                         " rows");
  }
  if (!logits.all_finite()) throw NumericError("softmax_xent: non-finite logits");

  SoftmaxXent out;
  out.probabilities = softmax_rows(logits);
  out.grad_logits = out.probabilities;
  const double inv_batch = 1.0 / static_cast<double>(logits.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw ArgumentError("softmax_xent: label " + std::to_string(y) +
                          " outside [0, " + std::to_string(logits.cols()) + ")");
    }
    total -= std::log(clip_probability(out.probabilities(r, y)));
    out.grad_logits(r, y) -= 1.0;
    for (double& g : out.grad_logits.row(r)) g *= inv_batch;
  }
  out.loss = total * inv_batch;
  return out;
}

}  // namespace memx
