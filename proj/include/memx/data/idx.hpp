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

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/data/dataset.hpp"

namespace memx {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

// Reads a whole file, inflating it when gzip-compressed. zlib passes plain
// files through unchanged.
inline std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof(buf));
    if (n < 0) {
      gzclose(f);
      throw FormatError(path.string() + ": corrupt gzip stream at offset " +
                        std::to_string(out.size()));
    }
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  gzclose(f);
  return out;
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes,
                               std::size_t offset, const std::string& file) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(file + ": truncated header at offset " +
                      std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace detail

// Loads an IDX image/label file pair (MNIST layout, optionally gzipped).
// Pixels are scaled by 1/255 and flattened row-major.
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path,
                        int class_count = 10) {
  const std::string img_name = images_path.string();
  const std::string lbl_name = labels_path.string();
  const auto images = detail::read_maybe_gzip(images_path);
  const auto labels = detail::read_maybe_gzip(labels_path);

  const std::uint32_t img_magic = detail::read_be32(images, 0, img_name);
  if (img_magic != kIdxImagesMagic) {
    throw FormatError(img_name + ": bad magic at offset 0 (expected 0x00000803)");
  }
  const std::uint32_t lbl_magic = detail::read_be32(labels, 0, lbl_name);
  if (lbl_magic != kIdxLabelsMagic) {
    throw FormatError(lbl_name + ": bad magic at offset 0 (expected 0x00000801)");
  }
  const std::uint32_t n = detail::read_be32(images, 4, img_name);
  const std::uint32_t rows = detail::read_be32(images, 8, img_name);
  const std::uint32_t cols = detail::read_be32(images, 12, img_name);
  const std::uint32_t n_labels = detail::read_be32(labels, 4, lbl_name);
  if (n != n_labels) {
    throw FormatError(lbl_name + ": label count " + std::to_string(n_labels) +
                      " at offset 4 disagrees with image count " +
                      std::to_string(n) + " in " + img_name);
  }
  const std::size_t d = std::size_t{rows} * cols;
  const std::size_t img_needed = 16 + std::size_t{n} * d;
  if (images.size() < img_needed) {
    throw FormatError(img_name + ": truncated at offset " +
                      std::to_string(images.size()) + " (expected " +
                      std::to_string(img_needed) + " bytes)");
  }
  if (labels.size() < 8 + std::size_t{n}) {
    throw FormatError(lbl_name + ": truncated at offset " +
                      std::to_string(labels.size()) + " (expected " +
                      std::to_string(8 + std::size_t{n}) + " bytes)");
  }

  Tensor2 features(n, d);
  auto flat = features.flat();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    flat[k] = static_cast<double>(images[16 + k]) / 255.0;
  }
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels[8 + i];
    if (y[i] >= class_count) {
      throw FormatError(lbl_name + ": label " + std::to_string(y[i]) +
                        " at offset " + std::to_string(8 + i) + " >= " +
                        std::to_string(class_count));
    }
  }
  return Dataset(std::move(features), std::move(y), class_count);
}

// Writes an uncompressed IDX pair. Features are rounded to the nearest of
// the 256 byte levels.
inline void write_idx(const Dataset& data, std::size_t rows, std::size_t cols,
                      const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
  if (rows * cols != data.feature_dim()) {
    throw DimensionError("write_idx: rows*cols != feature_dim");
  }
  std::vector<std::uint8_t> img;
  detail::append_be32(img, kIdxImagesMagic);
  detail::append_be32(img, static_cast<std::uint32_t>(data.size()));
  detail::append_be32(img, static_cast<std::uint32_t>(rows));
  detail::append_be32(img, static_cast<std::uint32_t>(cols));
  for (double v : data.features().flat()) {
    img.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  std::vector<std::uint8_t> lbl;
  detail::append_be32(lbl, kIdxLabelsMagic);
  detail::append_be32(lbl, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels()) lbl.push_back(static_cast<std::uint8_t>(y));

  auto dump = [](const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size()));
  };
  dump(images_path, img);
  dump(labels_path, lbl);
}

}  // namespace memx
