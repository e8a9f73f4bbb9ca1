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
#include "memx/data/dataset.hpp"

namespace memx {

// MEMX1 feature cache, little-endian:
//
//   "MEMX1"        5 bytes
//   version        u8   (= 1)
//   class count C  u32
//   feature dim d  u32
//   row count n    u64
//   labels         n x i32
//   features       n x d x f64, row-major
inline constexpr std::string_view kMemx1Magic = "MEMX1";
inline constexpr std::uint8_t kMemx1Version = 1;

inline std::vector<std::uint8_t> encode_memx1(const FeatureTable& t) {
  ByteWriter w;
  w.raw(kMemx1Magic);
  w.u8(kMemx1Version);
  w.u32(static_cast<std::uint32_t>(t.class_count));
  w.u32(static_cast<std::uint32_t>(t.features.cols()));
  w.u64(t.labels.size());
  for (int y : t.labels) w.i32(y);
  for (double v : t.features.flat()) w.f64(v);
  return w.bytes();
}

inline void write_memx1(const FeatureTable& t, const std::filesystem::path& path) {
  if (t.labels.size() != t.features.rows()) {
    throw DimensionError("write_memx1: label/row count mismatch");
  }
  ByteWriter::save_bytes(encode_memx1(t), path);
}

inline FeatureTable decode_memx1(ByteReader& r) {
  r.expect(kMemx1Magic);
  const std::uint8_t version = r.u8();
  if (version != kMemx1Version) r.fail("unsupported MEMX1 version " + std::to_string(version));
  FeatureTable t;
  t.class_count = static_cast<int>(r.u32());
  const std::uint32_t d = r.u32();
  const std::uint64_t n = r.u64();
  t.labels.resize(n);
  for (auto& y : t.labels) {
    y = r.i32();
    if (y < 0 || y >= t.class_count) r.fail("label out of range");
  }
  std::vector<double> data(n * d);
  for (double& v : data) v = r.f64();
  if (!r.at_end()) r.fail("trailing bytes");
  t.features = Tensor2(n, d, std::move(data));
  return t;
}

inline FeatureTable read_memx1(const std::filesystem::path& path) {
  auto r = ByteReader::open(path);
  return decode_memx1(r);
}

}  // namespace memx
