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

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "memx/data/binary_cache.hpp"
#include "memx/data/csv.hpp"
#include "memx/data/dataset.hpp"
#include "memx/data/gaussian.hpp"
#include "memx/data/idx.hpp"
#include "memx/data/splits.hpp"
#include "memx/model/trainer.hpp"
#include "memx/mi/evaluate.hpp"
#include "support/tempdir.hpp"

namespace memx {
namespace {

using test_support::TempDir;

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

// Two 2x2 images with pixels {0, 255} and labels {7, 3}.
struct IdxFixture {
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;
  IdxFixture() {
    be32(images, 0x803);
    be32(images, 2);
    be32(images, 2);
    be32(images, 2);
    for (std::uint8_t v : {0, 255, 255, 0, 255, 255, 0, 0}) images.push_back(v);
    be32(labels, 0x801);
    be32(labels, 2);
    labels.push_back(7);
    labels.push_back(3);
  }
};

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

TEST(IdxTest, LoadsEndpointsAndLabels) {
  TempDir dir("idx_ok");
  IdxFixture fx;
  write_bytes(dir / "img", fx.images);
  write_bytes(dir / "lbl", fx.labels);
  const Dataset d = load_idx(dir / "img", dir / "lbl");
  ASSERT_EQ(d.size(), 2u);
  ASSERT_EQ(d.feature_dim(), 4u);
  EXPECT_EQ(d.class_count(), 10);
  EXPECT_EQ(d.features()(0, 0), 0.0);
  EXPECT_EQ(d.features()(0, 1), 1.0);
  EXPECT_EQ(d.labels()[0], 7);
  EXPECT_EQ(d.labels()[1], 3);
}

TEST(IdxTest, ReadsGzippedFiles) {
  TempDir dir("idx_gz");
  IdxFixture fx;
  for (auto [name, bytes] : {std::pair{"img.gz", &fx.images}, std::pair{"lbl.gz", &fx.labels}}) {
    gzFile f = gzopen((dir / name).c_str(), "wb");
    ASSERT_NE(f, nullptr);
    gzwrite(f, bytes->data(), static_cast<unsigned>(bytes->size()));
    gzclose(f);
  }
  const Dataset d = load_idx(dir / "img.gz", dir / "lbl.gz");
  EXPECT_EQ(d.labels()[0], 7);
  EXPECT_EQ(d.features()(1, 2), 0.0);
}

TEST(IdxTest, BadMagicNamesFileAndOffset) {
  TempDir dir("idx_magic");
  IdxFixture fx;
  fx.images[3] = 0x02;
  write_bytes(dir / "img", fx.images);
  write_bytes(dir / "lbl", fx.labels);
  const std::string msg = error_of([&] { load_idx(dir / "img", dir / "lbl"); });
  EXPECT_NE(msg.find("img"), std::string::npos);
  EXPECT_NE(msg.find("offset 0"), std::string::npos);
}

TEST(IdxTest, TruncatedImagesAreRejected) {
  TempDir dir("idx_trunc");
  IdxFixture fx;
  fx.images.resize(fx.images.size() - 3);
  write_bytes(dir / "img", fx.images);
  write_bytes(dir / "lbl", fx.labels);
  const std::string msg = error_of([&] { load_idx(dir / "img", dir / "lbl"); });
  EXPECT_NE(msg.find("truncated"), std::string::npos);
  EXPECT_NE(msg.find("offset 21"), std::string::npos);
}

TEST(IdxTest, CountMismatchIsRejected) {
  TempDir dir("idx_count");
  IdxFixture fx;
  fx.labels[7] = 3;
  write_bytes(dir / "img", fx.images);
  write_bytes(dir / "lbl", fx.labels);
  const std::string msg = error_of([&] { load_idx(dir / "img", dir / "lbl"); });
  EXPECT_NE(msg.find("lbl"), std::string::npos);
  EXPECT_NE(msg.find("offset 4"), std::string::npos);
}

TEST(IdxTest, WriteThenLoadRoundTrips) {
  TempDir dir("idx_rt");
  const Dataset d(Tensor2(2, 4, {0.0, 1.0, 0.2, 0.6, 1.0, 0.0, 0.4, 0.8}), {1, 9}, 10);
  write_idx(d, 2, 2, dir / "img", dir / "lbl");
  const Dataset back = load_idx(dir / "img", dir / "lbl");
  EXPECT_EQ(back.labels(), d.labels());
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_NEAR(back.features().flat()[k], d.features().flat()[k], 0.5 / 255.0);
  }
}

TEST(CsvTest, LoadsAndInfersClassCount) {
  TempDir dir("csv_ok");
  std::ofstream(dir / "a.csv") << "2,0.5,0.25\n0,1,0\n";
  const Dataset d = load_csv(dir / "a.csv");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.class_count(), 3);
  EXPECT_EQ(d.features()(0, 1), 0.25);
}

TEST(CsvTest, RejectsOutOfRangeFeatureWithLocation) {
  TempDir dir("csv_bad");
  std::ofstream(dir / "a.csv") << "0,0.5,0.5\n1,0.5,1.5\n";
  const std::string msg = error_of([&] { load_csv(dir / "a.csv"); });
  EXPECT_NE(msg.find("a.csv:2"), std::string::npos);
  EXPECT_NE(msg.find("outside [0, 1]"), std::string::npos);
}

TEST(CsvTest, RejectsRaggedRowsAndBadLabels) {
  TempDir dir("csv_rag");
  std::ofstream(dir / "a.csv") << "0,0.5,0.5\n1,0.5\n";
  EXPECT_THROW(load_csv(dir / "a.csv"), FormatError);
  std::ofstream(dir / "b.csv") << "1.5,0.5\n";
  EXPECT_THROW(load_csv(dir / "b.csv"), FormatError);
}

TEST(CsvTest, WriteThenLoadIsExact) {
  TempDir dir("csv_rt");
  const Dataset d = gen_gaussian({3, 4, 5, 0.1, 9, 0.0});
  write_csv(d.table(), dir / "d.csv");
  const Dataset back = load_csv(dir / "d.csv", 3);
  EXPECT_EQ(back.features(), d.features());
  EXPECT_EQ(back.labels(), d.labels());
}

TEST(Memx1Test, RoundTripIsBitExact) {
  TempDir dir("memx1");
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    FeatureTable t;
    const std::size_t n = 1 + rng.below(30), d = 1 + rng.below(8);
    t.class_count = 5;
    t.features = Tensor2(n, d);
    for (double& v : t.features.flat()) v = rng.normal(0.0, 10.0);
    for (std::size_t i = 0; i < n; ++i) t.labels.push_back(static_cast<int>(rng.below(5)));
    write_memx1(t, dir / "t.memx1");
    const FeatureTable back = read_memx1(dir / "t.memx1");
    EXPECT_EQ(back.features, t.features);
    EXPECT_EQ(back.labels, t.labels);
    EXPECT_EQ(back.class_count, 5);
  }
}

TEST(Memx1Test, HeaderLayoutAndCorruption) {
  FeatureTable t{Tensor2(1, 2, {0.25, 0.5}), {1}, 2};
  const auto bytes = encode_memx1(t);
  ASSERT_EQ(bytes.size(), 5u + 1 + 4 + 4 + 8 + 4 + 16);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "MEMX1");
  EXPECT_EQ(bytes[5], 1);
  EXPECT_EQ(bytes[6], 2);  // C, little-endian
  auto bad = bytes;
  bad[0] = 'X';
  ByteReader r1(bad, "bad");
  EXPECT_THROW(decode_memx1(r1), FormatError);
  auto cut = bytes;
  cut.pop_back();
  ByteReader r2(cut, "cut");
  EXPECT_THROW(decode_memx1(r2), FormatError);
}

TEST(DatasetTest, ValidatesRangeAndLabels) {
  EXPECT_THROW(Dataset(Tensor2(1, 2, {0.5, 1.5}), {0}, 2), DomainError);
  EXPECT_THROW(Dataset(Tensor2(1, 2, {0.5, 0.5}), {2}, 2), ArgumentError);
  EXPECT_THROW(Dataset(Tensor2(2, 2), {0}, 2), DimensionError);
}

TEST(DatasetTest, ConcatMarksPoisonRows) {
  const Dataset a(Tensor2(2, 1, {0.1, 0.2}), {0, 1}, 2);
  const Dataset b(Tensor2(1, 1, {0.3}), {1}, 2);
  const Dataset c = concat(a, b, true);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_FALSE(c.is_poison(0));
  EXPECT_TRUE(c.is_poison(2));
  EXPECT_EQ(c.features()(2, 0), 0.3);
}

TEST(GaussianTest, ZeroSpreadGivesCenters) {
  const Dataset d = gen_gaussian({2, 2, 5, 0.0, 3, 0.0});
  ASSERT_EQ(d.size(), 10u);
  for (int c = 0; c < 2; ++c) {
    const auto rows = d.class_indices(c);
    ASSERT_EQ(rows.size(), 5u);
    for (std::size_t r : rows) {
      EXPECT_EQ(d.example(r).x, d.example(rows[0]).x);
      for (double v : d.example(r).x) {
        EXPECT_GE(v, 0.25);
        EXPECT_LE(v, 0.75);
      }
    }
  }
}

TEST(GaussianTest, SameSeedIsBitIdentical) {
  EXPECT_EQ(gen_gaussian({10, 32, 20, 0.08, 5, 0.0}).features(),
            gen_gaussian({10, 32, 20, 0.08, 5, 0.0}).features());
  EXPECT_NE(gen_gaussian({10, 32, 20, 0.08, 5, 0.0}).features(),
            gen_gaussian({10, 32, 20, 0.08, 6, 0.0}).features());
}

TEST(GaussianTest, RejectsBadParameters) {
  EXPECT_THROW(gen_gaussian({1, 2, 5, 0.1, 0, 0.0}), ArgumentError);
  EXPECT_THROW(gen_gaussian({2, 1, 5, 0.1, 0, 0.0}), ArgumentError);
  EXPECT_THROW(gen_gaussian({2, 2, 5, -0.1, 0, 0.0}), ArgumentError);
}

TEST(GaussianTest, LinearHeadOnRandomEncoderSeparatesDefaultFixture) {
  const Dataset src = gen_gaussian({10, 32, 200, 0.08, 21, 0.0});
  SplitSpec ss;
  ss.sizes = {1000, 500, 500};
  ss.seed = 22;
  const Splits sp = make_splits(src, ss);
  Rng rng(23);
  const std::size_t enc_w[] = {32, 64};
  const std::size_t head_w[] = {64, 10};
  ComposedModel m{EncoderModel::random(enc_w, rng),
                  {Network::build(head_w, Activation::identity, Activation::identity, rng)}};
  TrainConfig cfg;
  cfg.seed = 24;
  const auto trained = train_head(m, sp.clean, cfg);
  EXPECT_GE(test_accuracy(trained.model, sp.test), 0.90);
}

TEST(SplitsTest, BalanceArithmetic) {
  const Dataset src = gen_gaussian({3, 2, 10, 0.1, 1, 0.0});
  SplitSpec bad;
  bad.sizes = {10, 10, 10};
  EXPECT_THROW(make_splits(src, bad), ArgumentError);
  SplitSpec ok;
  ok.sizes = {9, 9, 9};
  const Splits sp = make_splits(src, ok);
  for (const Dataset* d : {&sp.clean, &sp.test, &sp.shadow}) {
    EXPECT_EQ(d->class_counts(), (std::vector<std::size_t>{3, 3, 3}));
  }
}

TEST(SplitsTest, DeficientClassIsNamed) {
  Tensor2 x(7, 1, 0.5);
  const Dataset src(x, {0, 0, 0, 0, 1, 1, 1}, 2);
  SplitSpec ss;
  ss.sizes = {4, 2, 2};
  try {
    make_splits(src, ss);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

// Property sweep over random sources and sizes: splits are disjoint,
// class-balanced, and equal-sized when sizes are left open.
TEST(SplitsTest, DisjointBalancedProperty) {
  Rng rng(30);
  for (int trial = 0; trial < 25; ++trial) {
    const int c = 2 + static_cast<int>(rng.below(5));
    const std::size_t per = 6 + rng.below(20);
    const Dataset src = gen_gaussian({c, 3, per, 0.1, rng.next_u64(), 0.0});
    SplitSpec ss;
    ss.seed = rng.next_u64();
    const Splits sp = make_splits(src, ss);
    std::set<std::size_t> seen;
    for (const auto& rows : sp.source_rows) {
      for (std::size_t r : rows) EXPECT_TRUE(seen.insert(r).second);
    }
    EXPECT_EQ(sp.clean.size(), sp.test.size());
    EXPECT_EQ(sp.test.size(), sp.shadow.size());
    for (const Dataset* d : {&sp.clean, &sp.test, &sp.shadow}) {
      const auto counts = d->class_counts();
      for (std::size_t k : counts) EXPECT_EQ(k, counts[0]);
    }
    for (std::size_t i = 0; i < sp.clean.size(); ++i) {
      EXPECT_EQ(sp.clean.labels()[i], src.labels()[sp.source_rows[0][i]]);
    }
  }
}

TEST(SplitsTest, UnbalancedModeCutsExactSizes) {
  const Dataset src = gen_gaussian({3, 2, 10, 0.1, 1, 0.0});
  SplitSpec ss;
  ss.balance = false;
  ss.sizes = {7, 5, 0};
  const Splits sp = make_splits(src, ss);
  EXPECT_EQ(sp.clean.size(), 7u);
  EXPECT_EQ(sp.test.size(), 5u);
  EXPECT_EQ(sp.shadow.size(), 18u);
}

}  // namespace
}  // namespace memx
