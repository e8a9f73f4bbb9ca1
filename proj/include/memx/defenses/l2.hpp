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

#include "memx/core/error.hpp"
#include "memx/core/layer.hpp"

namespace memx {

// loss + lambda * sum ||W||^2 over weight matrices (biases excluded). When
// `grads` is given, 2 * lambda * W is added to its weight blocks.
inline double l2_regularized_loss(double base_loss, const Network& net, double lambda,
                                  Gradients* grads = nullptr) {
  if (lambda < 0.0) throw ArgumentError("l2_regularized_loss: lambda must be >= 0");
  if (grads != nullptr && grads->layers.size() != net.depth()) {
    throw DimensionError("l2_regularized_loss: gradient/network depth mismatch");
  }
  double penalty = 0.0;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto w = net.layers()[l].weights.flat();
    for (double v : w) penalty += v * v;
    if (grads != nullptr && lambda != 0.0) {
      auto g = grads->layers[l].weights.flat();
      for (std::size_t i = 0; i < w.size(); ++i) g[i] += 2.0 * lambda * w[i];
    }
  }
  return base_loss + lambda * penalty;
}

}  // namespace memx
