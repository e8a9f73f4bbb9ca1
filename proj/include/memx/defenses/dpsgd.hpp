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
#include "memx/core/layer.hpp"
#include "memx/core/optimizer.hpp"
#include "memx/core/rng.hpp"

namespace memx {

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Scales `g` by min(1, C / ||g||). Returns the norm before clipping.
inline double clip_to_norm(std::span<double> g, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ArgumentError("clip_to_norm: clip norm must be > 0");
  const double norm = l2_norm(g);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (double& x : g) x *= scale;
  }
  return norm;
}

struct DpAggregate {
  std::vector<double> gradient;    // noisy mean, flat parameter layout
  double max_clipped_norm = 0.0;   // largest per-example norm after clipping
};

// Clips every per-example gradient to norm C, sums them, adds
// N(0, sigma^2 C^2) to each coordinate and divides by lot_size. Noise is
// drawn coordinate by coordinate in flat parameter order.
inline DpAggregate dpsgd_aggregate(std::vector<std::vector<double>> per_example,
                                   double clip_norm, double noise_multiplier,
                                   std::size_t lot_size, Rng& rng) {
  if (!(clip_norm > 0.0)) throw ArgumentError("dpsgd: clip norm must be > 0");
  if (noise_multiplier < 0.0) throw ArgumentError("dpsgd: noise multiplier must be >= 0");
  if (lot_size == 0) throw ArgumentError("dpsgd: lot size must be >= 1");
  if (per_example.empty()) throw ArgumentError("dpsgd: no per-example gradients");

  const std::size_t dim = per_example.front().size();
  DpAggregate out;
  out.gradient.assign(dim, 0.0);
  for (auto& g : per_example) {
    if (g.size() != dim) throw DimensionError("dpsgd: ragged per-example gradients");
    clip_to_norm(g, clip_norm);
    out.max_clipped_norm = std::max(out.max_clipped_norm, l2_norm(g));
    for (std::size_t i = 0; i < dim; ++i) out.gradient[i] += g[i];
  }
  const double stddev = noise_multiplier * clip_norm;
  const double inv_lot = 1.0 / static_cast<double>(lot_size);
  for (double& v : out.gradient) {
    if (stddev > 0.0) v += stddev * rng.normal();
    v *= inv_lot;
  }
  return out;
}

// Carves a flat vector into views shaped like `params`.
inline std::vector<ParamView> slice_like(std::span<const ParamView> params,
                                         std::span<double> flat) {
  std::vector<ParamView> out;
  std::size_t pos = 0;
  for (const auto& p : params) {
    if (pos + p.values.size() > flat.size()) {
      throw DimensionError("slice_like: flat vector too short");
    }
    out.push_back({p.name, flat.subspan(pos, p.values.size())});
    pos += p.values.size();
  }
  if (pos != flat.size()) throw DimensionError("slice_like: flat vector too long");
  return out;
}

inline std::vector<double> flatten(Gradients& g) {
  std::vector<double> out;
  for (const auto& v : g.views()) out.insert(out.end(), v.values.begin(), v.values.end());
  return out;
}

// One DP-SGD update of `net` from per-example gradients in flat layout.
inline DpAggregate dpsgd_step(Network& net, std::vector<std::vector<double>> per_example,
                              double clip_norm, double noise_multiplier,
                              std::size_t lot_size, OptimizerState& opt, Rng& rng) {
  DpAggregate agg = dpsgd_aggregate(std::move(per_example), clip_norm,
                                    noise_multiplier, lot_size, rng);
  auto params = net.parameters();
  auto grads = slice_like(params, agg.gradient);
  optimizer_step(opt, params, grads);
  return agg;
}

}  // namespace memx
