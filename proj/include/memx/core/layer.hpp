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
#include <utility>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/rng.hpp"
#include "memx/core/tensor.hpp"

namespace memx {

enum class Activation : std::uint8_t { identity = 0, tanh = 1 };

inline const char* to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "identity";
}

// Fully connected layer y = act(W x + b) with W stored out x in.
struct DenseLayer {
  Tensor2 weights;
  std::vector<double> bias;
  Activation activation = Activation::identity;

  DenseLayer() = default;
  DenseLayer(Tensor2 w, std::vector<double> b, Activation act)
      : weights(std::move(w)), bias(std::move(b)), activation(act) {
    if (bias.size() != weights.rows()) {
      throw DimensionError("DenseLayer: bias length " +
                           std::to_string(bias.size()) + " != out dim " +
                           std::to_string(weights.rows()));
    }
  }

  // Uniform in +-sqrt(6 / (fan_in + fan_out)), zero bias.
  static DenseLayer glorot(std::size_t in, std::size_t out, Activation act,
                           Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor2 w(out, in);
    for (double& v : w.flat()) v = rng.uniform(-limit, limit);
    return DenseLayer(std::move(w), std::vector<double>(out, 0.0), act);
  }

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }

  bool operator==(const DenseLayer&) const = default;
};

// A named view over one parameter (or gradient) block.
struct ParamView {
  std::string name;
  std::span<double> values;
};

struct LayerGrad {
  Tensor2 weights;
  std::vector<double> bias;
};

struct Gradients {
  std::vector<LayerGrad> layers;
  Tensor2 input;  // dLoss/dInput, same shape as the forward input

  std::vector<ParamView> views() {
    std::vector<ParamView> out;
    out.reserve(layers.size() * 2);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.push_back({"layer" + std::to_string(i) + ".weights",
                     layers[i].weights.flat()});
      out.push_back({"layer" + std::to_string(i) + ".bias", layers[i].bias});
    }
    return out;
  }
};

// Ordered stack of dense layers. Every mutable access bumps the revision so
// that a forward cache taken before a parameter update is rejected by
// backward().
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      if (layers_[i].in_dim() != layers_[i - 1].out_dim()) {
        throw DimensionError("Network: layer " + std::to_string(i) +
                             " expects " + std::to_string(layers_[i].in_dim()) +
                             " inputs, previous layer yields " +
                             std::to_string(layers_[i - 1].out_dim()));
      }
    }
  }

  // Randomly initialized stack over widths {in, h1, ..., out}.
  static Network build(std::span<const std::size_t> widths,
                       Activation hidden, Activation last, Rng& rng) {
    if (widths.size() < 2) throw ArgumentError("Network::build: need >= 2 widths");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const bool is_last = i + 2 == widths.size();
      layers.push_back(DenseLayer::glorot(widths[i], widths[i + 1],
                                          is_last ? last : hidden, rng));
    }
    return Network(std::move(layers));
  }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t depth() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  std::size_t in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  std::uint64_t revision() const { return revision_; }

  DenseLayer& mutable_layer(std::size_t i) {
    ++revision_;
    return layers_.at(i);
  }

  std::vector<ParamView> parameters() {
    ++revision_;
    std::vector<ParamView> out;
    out.reserve(layers_.size() * 2);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      out.push_back({"layer" + std::to_string(i) + ".weights",
                     layers_[i].weights.flat()});
      out.push_back({"layer" + std::to_string(i) + ".bias", layers_[i].bias});
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  // Gradient buffers shaped like this network's parameters, zero-filled.
  Gradients zero_gradients(std::size_t batch_rows = 0) const {
    Gradients g;
    for (const auto& l : layers_) {
      g.layers.push_back({Tensor2(l.out_dim(), l.in_dim()),
                          std::vector<double>(l.out_dim(), 0.0)});
    }
    g.input = Tensor2(batch_rows, in_dim());
    return g;
  }

  bool operator==(const Network& o) const { return layers_ == o.layers_; }

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t revision_ = 0;
};

// Cached activations of one forward call. activations[0] is the input and
// activations[i + 1] the output of layer i.
struct ForwardPass {
  std::vector<Tensor2> activations;
  const Network* network = nullptr;
  std::uint64_t revision = 0;

  const Tensor2& output() const { return activations.back(); }
};

namespace detail {

inline void dense_forward(const DenseLayer& layer, const Tensor2& x, Tensor2& y) {
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  y = Tensor2(x.rows(), out);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.row(r).data();
    double* yr = y.row(r).data();
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = layer.weights.row(o).data();
      // Four independent partial sums let the compiler vectorize without
      // reassociating; the summation order is fixed, so results are
      // reproducible.
      double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
      std::size_t i = 0;
      for (; i + 4 <= in; i += 4) {
        a0 += w[i] * xr[i];
        a1 += w[i + 1] * xr[i + 1];
        a2 += w[i + 2] * xr[i + 2];
        a3 += w[i + 3] * xr[i + 3];
      }
      for (; i < in; ++i) a0 += w[i] * xr[i];
      const double acc = layer.bias[o] + ((a0 + a1) + (a2 + a3));
      yr[o] = layer.activation == Activation::tanh ? std::tanh(acc) : acc;
    }
  }
}

}  // namespace detail

inline ForwardPass forward(const Network& net, const Tensor2& x) {
  if (net.empty()) throw ArgumentError("forward: empty network");
  if (x.cols() != net.in_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                         " columns, network expects " +
                         std::to_string(net.in_dim()));
  }
  ForwardPass pass;
  pass.network = &net;
  pass.revision = net.revision();
  pass.activations.resize(net.depth() + 1);
  pass.activations[0] = x;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    detail::dense_forward(net.layers()[l], pass.activations[l],
                          pass.activations[l + 1]);
  }
  return pass;
}

// Output only; skips keeping intermediates alive.
inline Tensor2 evaluate(const Network& net, const Tensor2& x) {
  if (net.empty()) return x;
  if (x.cols() != net.in_dim()) {
    throw DimensionError("evaluate: input has " + std::to_string(x.cols()) +
                         " columns, network expects " +
                         std::to_string(net.in_dim()));
  }
  Tensor2 cur = x;
  Tensor2 next;
  for (const auto& layer : net.layers()) {
    detail::dense_forward(layer, cur, next);
    std::swap(cur, next);
  }
  return cur;
}

// Backpropagates dLoss/dOutput through the cached pass. Returns gradients
// for every weight and bias plus dLoss/dInput.
inline Gradients backward(const Network& net, const ForwardPass& pass,
                          const Tensor2& grad_output) {
  if (pass.network != &net || pass.revision != net.revision() ||
      pass.activations.size() != net.depth() + 1) {
    throw StateError("backward: forward cache does not belong to the current "
                     "network parameters");
  }
  const Tensor2& out = pass.output();
  if (grad_output.rows() != out.rows() || grad_output.cols() != out.cols()) {
    throw DimensionError("backward: output gradient shape mismatch");
  }

  Gradients grads = net.zero_gradients();
  Tensor2 delta = grad_output;
  for (std::size_t l = net.depth(); l-- > 0;) {
    const DenseLayer& layer = net.layers()[l];
    const Tensor2& x = pass.activations[l];
    const Tensor2& y = pass.activations[l + 1];
    if (layer.activation == Activation::tanh) {
      for (std::size_t k = 0; k < delta.size(); ++k) {
        const double a = y.flat()[k];
        delta.flat()[k] *= 1.0 - a * a;
      }
    }
    LayerGrad& g = grads.layers[l];
    const std::size_t in = layer.in_dim();
    const std::size_t outd = layer.out_dim();
    Tensor2 dx(x.rows(), in);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double* xr = x.row(r).data();
      const double* dr = delta.row(r).data();
      double* dxr = dx.row(r).data();
      for (std::size_t o = 0; o < outd; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        g.bias[o] += d;
        double* gw = g.weights.row(o).data();
        const double* w = layer.weights.row(o).data();
        for (std::size_t i = 0; i < in; ++i) {
          gw[i] += d * xr[i];
          dxr[i] += d * w[i];
        }
      }
    }
    delta = std::move(dx);
  }
  grads.input = std::move(delta);
  return grads;
}

}  // namespace memx
