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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "memx/core/error.hpp"

namespace memx {

// Little-endian byte sink used by the binary containers.
class ByteWriter {
 public:
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  void save(const std::filesystem::path& path) const { save_bytes(bytes_, path); }

  static void save_bytes(const std::vector<std::uint8_t>& bytes,
                         const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked little-endian reader; errors name the source and offset.
class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> bytes, std::string source)
      : bytes_(std::move(bytes)), source_(std::move(source)) {}

  static ByteReader open(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return ByteReader(std::move(bytes), path.string());
  }

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  const std::string& source() const { return source_; }

  void expect(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
      throw FormatError(source_ + ": bad magic at offset " + std::to_string(pos_) +
                        " (expected " + std::string(magic) + ")");
    }
    pos_ += magic.size();
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ": " + what + " at offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(source_ + ": truncated at offset " + std::to_string(pos_) +
                        " (need " + std::to_string(n) + " more bytes)");
    }
  }

  std::vector<std::uint8_t> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace memx
