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

#include <filesystem>
#include <string>
#include <vector>

#include "memx/core/bytes.hpp"
#include "memx/model/composed.hpp"

namespace memx {

// MEMXMDL container, little-endian:
//
//   "MEMXMDL"             7 bytes
//   version               u8 (= 1)
//   input dim             u32
//   frozen                u8
//   provenance            u8 (0 seeded-random, 1 trained-on-shadow)
//   encoder layer count   u32, then per layer: in u32, out u32, activation u8
//   head layer count      u32, then per layer: in u32, out u32, activation u8
//   parameters            f64 per value; encoder layers then head layers,
//                         each layer's weights (row-major, out x in) then bias
inline constexpr std::string_view kModelMagic = "MEMXMDL";
inline constexpr std::uint8_t kModelVersion = 1;

namespace detail {

inline void write_arch(ByteWriter& w, const Network& net) {
  w.u32(static_cast<std::uint32_t>(net.depth()));
  for (const auto& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.in_dim()));
    w.u32(static_cast<std::uint32_t>(l.out_dim()));
    w.u8(static_cast<std::uint8_t>(l.activation));
  }
}

struct LayerShape {
  std::uint32_t in = 0;
  std::uint32_t out = 0;
  Activation activation = Activation::identity;
};

inline std::vector<LayerShape> read_arch(ByteReader& r) {
  const std::uint32_t depth = r.u32();
  if (depth > 1024) r.fail("implausible layer count");
  std::vector<LayerShape> shapes(depth);
  for (auto& s : shapes) {
    s.in = r.u32();
    s.out = r.u32();
    const std::uint8_t act = r.u8();
    if (act > 1) r.fail("unknown activation code");
    s.activation = static_cast<Activation>(act);
  }
  return shapes;
}

inline void write_params(ByteWriter& w, const Network& net) {
  for (const auto& l : net.layers()) {
    for (double v : l.weights.flat()) w.f64(v);
    for (double v : l.bias) w.f64(v);
  }
}

inline Network read_params(ByteReader& r, const std::vector<LayerShape>& shapes) {
  std::vector<DenseLayer> layers;
  for (const auto& s : shapes) {
    Tensor2 w(s.out, s.in);
    for (double& v : w.flat()) v = r.f64();
    std::vector<double> b(s.out);
    for (double& v : b) v = r.f64();
    layers.emplace_back(std::move(w), std::move(b), s.activation);
  }
  return Network(std::move(layers));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_model(const ComposedModel& m) {
  ByteWriter w;
  w.raw(kModelMagic);
  w.u8(kModelVersion);
  w.u32(static_cast<std::uint32_t>(m.encoder.input_dim));
  w.u8(m.encoder.frozen ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(m.encoder.provenance));
  detail::write_arch(w, m.encoder.net);
  detail::write_arch(w, m.head.net);
  detail::write_params(w, m.encoder.net);
  detail::write_params(w, m.head.net);
  return w.bytes();
}

inline ComposedModel decode_model(ByteReader& r) {
  r.expect(kModelMagic);
  const std::uint8_t version = r.u8();
  if (version != kModelVersion) r.fail("unsupported MEMXMDL version " + std::to_string(version));
  ComposedModel m;
  m.encoder.input_dim = r.u32();
  m.encoder.frozen = r.u8() != 0;
  const std::uint8_t prov = r.u8();
  if (prov > 1) r.fail("unknown encoder provenance");
  m.encoder.provenance = static_cast<EncoderProvenance>(prov);
  const auto enc_shapes = detail::read_arch(r);
  const auto head_shapes = detail::read_arch(r);
  m.encoder.net = detail::read_params(r, enc_shapes);
  m.head.net = detail::read_params(r, head_shapes);
  if (!r.at_end()) r.fail("trailing bytes");
  if (!m.encoder.net.empty() && m.encoder.net.in_dim() != m.encoder.input_dim) {
    throw FormatError(r.source() + ": encoder input dim disagrees with header");
  }
  return m;
}

inline void save_model(const ComposedModel& m, const std::filesystem::path& path) {
  ByteWriter::save_bytes(encode_model(m), path);
}

inline ComposedModel load_model(const std::filesystem::path& path) {
  auto r = ByteReader::open(path);
  return decode_model(r);
}

}  // namespace memx
