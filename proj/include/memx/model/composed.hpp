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

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/layer.hpp"
#include "memx/core/loss.hpp"
#include "memx/core/rng.hpp"

namespace memx {

enum class EncoderProvenance : std::uint8_t { seeded_random = 0, trained_on_shadow = 1 };

inline const char* to_string(EncoderProvenance p) {
  return p == EncoderProvenance::trained_on_shadow ? "trained-on-shadow" : "seeded-random";
}

// Feature extractor g. An empty layer stack is the identity map.
struct EncoderModel {
  Network net;
  std::size_t input_dim = 0;
  bool frozen = true;
  EncoderProvenance provenance = EncoderProvenance::seeded_random;

  static EncoderModel identity(std::size_t dim) {
    EncoderModel e;
    e.input_dim = dim;
    return e;
  }

  // Tanh stack over widths {in, ..., latent}.
  static EncoderModel random(std::span<const std::size_t> widths, Rng& rng) {
    EncoderModel e;
    e.net = Network::build(widths, Activation::tanh, Activation::tanh, rng);
    e.input_dim = widths.front();
    e.provenance = EncoderProvenance::seeded_random;
    return e;
  }

  std::size_t latent_dim() const { return net.empty() ? input_dim : net.out_dim(); }

  Tensor2 encode(const Tensor2& x) const {
    if (x.cols() != input_dim) {
      throw DimensionError("encode: input has " + std::to_string(x.cols()) +
                           " columns, encoder expects " + std::to_string(input_dim));
    }
    return evaluate(net, x);
  }
};

// Classifier c: latent -> hidden (tanh) -> classes (identity; softmax is
// applied by the loss and by predict()).
struct ClassifierHead {
  Network net;

  static ClassifierHead make(std::size_t latent_dim, std::size_t classes, Rng& rng,
                             std::size_t hidden = 128) {
    const std::size_t widths[] = {latent_dim, hidden, classes};
    return {Network::build(widths, Activation::tanh, Activation::identity, rng)};
  }

  std::size_t hidden_width() const { return net.layers().front().out_dim(); }
  std::size_t class_count() const { return net.out_dim(); }
};

// f(x) = softmax(c(g(x))).
struct ComposedModel {
  EncoderModel encoder;
  ClassifierHead head;

  std::size_t input_dim() const { return encoder.input_dim; }
  std::size_t class_count() const { return head.class_count(); }

  Tensor2 logits(const Tensor2& x) const {
    if (encoder.latent_dim() != head.net.in_dim()) {
      throw DimensionError("ComposedModel: encoder latent dim " +
                           std::to_string(encoder.latent_dim()) +
                           " != head input dim " + std::to_string(head.net.in_dim()));
    }
    return evaluate(head.net, encoder.encode(x));
  }
};

// Clipped softmax probability rows.
inline Tensor2 predict(const ComposedModel& model, const Tensor2& xs) {
  Tensor2 p = softmax_rows(model.logits(xs));
  for (double& v : p.flat()) v = clip_probability(v);
  return p;
}

// FNV-1a over the raw bits of every parameter.
inline std::uint64_t parameter_checksum(const Network& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& l : net.layers()) {
    for (double v : l.weights.flat()) feed(v);
    for (double v : l.bias) feed(v);
  }
  return h;
}

}  // namespace memx
