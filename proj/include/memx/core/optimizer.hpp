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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/layer.hpp"

namespace memx {

enum class OptimizerKind : std::uint8_t { sgd = 0, adam = 1 };

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static OptimizerState sgd(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::sgd;
    s.learning_rate = lr;
    return s;
  }
  static OptimizerState adam(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::adam;
    s.learning_rate = lr;
    return s;
  }
};

// Applies one update to `params` in place. Params and grads are matched by
// position; moment buffers are allocated lazily on the first step.
inline void optimizer_step(OptimizerState& state, std::span<const ParamView> params,
                           std::span<const ParamView> grads) {
  if (params.size() != grads.size()) {
    throw DimensionError("optimizer_step: " + std::to_string(params.size()) +
                         " parameter blocks but " + std::to_string(grads.size()) +
                         " gradient blocks");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].values.size() != grads[k].values.size()) {
      throw DimensionError("optimizer_step: shape mismatch for " + params[k].name);
    }
    for (double g : grads[k].values) {
      if (!std::isfinite(g)) {
        throw NumericError("optimizer_step: non-finite gradient in " +
                           params[k].name);
      }
    }
  }

  ++state.step_count;
  if (state.kind == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto p = params[k].values;
      auto g = grads[k].values;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= state.learning_rate * g[i];
    }
    return;
  }

  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.values.size(), 0.0);
      state.v.emplace_back(p.values.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("optimizer_step: moment buffers do not match parameters");
  }
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].values;
    auto g = grads[k].values;
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.size()) {
      throw DimensionError("optimizer_step: moment shape mismatch for " +
                           params[k].name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.eps_adam);
    }
  }
}

}  // namespace memx
