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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "memx/data/gaussian.hpp"
#include "memx/model/composed.hpp"
#include "memx/model/serialize.hpp"
#include "memx/model/trainer.hpp"
#include "support/tempdir.hpp"

namespace memx {
namespace {

Dataset small_fixture(std::uint64_t seed) { return gen_gaussian({4, 6, 25, 0.1, seed, 0.0}); }

ComposedModel random_model(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t widths[] = {6, 8};
  return {EncoderModel::random(widths, rng), ClassifierHead::make(8, 4, rng, 16)};
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 20;
  cfg.hidden_width = 16;
  cfg.seed = 99;
  return cfg;
}

TEST(ModelTest, PredictRowsAreDistributions) {
  const ComposedModel m = random_model(1);
  const Tensor2 p = predict(m, small_fixture(2).features());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (double v : p.row(i)) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(ModelTest, ZeroHeadPredictsUniform) {
  ComposedModel m = random_model(3);
  for (auto& p : m.head.net.parameters()) {
    for (double& v : p.values) v = 0.0;
  }
  const Tensor2 p = predict(m, small_fixture(4).features());
  for (double v : p.flat()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(ModelTest, IdentityEncoderPassesInputThrough) {
  const EncoderModel e = EncoderModel::identity(3);
  const Tensor2 x(2, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  EXPECT_EQ(e.encode(x), x);
  EXPECT_EQ(e.latent_dim(), 3u);
  EXPECT_THROW(e.encode(Tensor2(1, 2)), DimensionError);
}

TEST(ModelTest, FrozenEncoderIsBitIdenticalAfterTraining) {
  const ComposedModel m = random_model(5);
  const auto before_enc = parameter_checksum(m.encoder.net);
  const auto before_head = parameter_checksum(m.head.net);
  const TrainResult r = train_head(m, small_fixture(6), quick_config());
  EXPECT_EQ(parameter_checksum(r.model.encoder.net), before_enc);
  EXPECT_NE(parameter_checksum(r.model.head.net), before_head);
  EXPECT_EQ(r.epochs_run, 3);
  EXPECT_EQ(r.log.size(), 3u);
}

TEST(ModelTest, FineTuneMovesEncoderSlowly) {
  const ComposedModel m = random_model(7);
  TrainConfig cfg = quick_config();
  cfg.fine_tune = true;
  const TrainResult r = train_head(m, small_fixture(8), cfg);
  double max_step = 0.0;
  const auto& a = m.encoder.net.layers()[0].weights.flat();
  const auto& b = r.model.encoder.net.layers()[0].weights.flat();
  for (std::size_t i = 0; i < a.size(); ++i) max_step = std::max(max_step, std::abs(a[i] - b[i]));
  EXPECT_GT(max_step, 0.0);
  // Adam moves each coordinate by at most about lr per step; 15 steps here.
  EXPECT_LT(max_step, 15 * cfg.fine_tune_lr * 1.01);
}

TEST(ModelTest, SameSeedSameModel) {
  const Dataset d = small_fixture(9);
  const auto a = train_head(random_model(10), d, quick_config());
  const auto b = train_head(random_model(10), d, quick_config());
  EXPECT_EQ(parameter_checksum(a.model.head.net), parameter_checksum(b.model.head.net));
  TrainConfig other = quick_config();
  other.seed = 100;
  const auto c = train_head(random_model(10), d, other);
  EXPECT_NE(parameter_checksum(a.model.head.net), parameter_checksum(c.model.head.net));
}

TEST(ModelTest, ZeroEpochsReturnsInputModel) {
  const ComposedModel m = random_model(11);
  TrainConfig cfg = quick_config();
  cfg.epochs = 0;
  const auto r = train_head(m, small_fixture(12), cfg);
  EXPECT_EQ(parameter_checksum(r.model.head.net), parameter_checksum(m.head.net));
  EXPECT_TRUE(r.log.empty());
}

TEST(ModelTest, DimensionMismatchIsRejected) {
  const ComposedModel m = random_model(13);
  const Dataset wrong = gen_gaussian({4, 5, 5, 0.1, 1, 0.0});
  EXPECT_THROW(train_head(m, wrong, quick_config()), DimensionError);
  const Dataset too_many_classes = gen_gaussian({5, 6, 5, 0.1, 1, 0.0});
  EXPECT_THROW(train_head(m, too_many_classes, quick_config()), DimensionError);
}

TEST(ModelTest, DivergenceIsReportedWithEpoch) {
  ComposedModel m = random_model(14);
  m.head.net.mutable_layer(1).bias[0] = std::nan("");
  try {
    train_head(m, small_fixture(15), quick_config());
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}

TEST(ModelTest, PoisonRowsAreLoggedSeparately) {
  const Dataset clean = small_fixture(16);
  const Dataset extra = gen_gaussian({4, 6, 2, 0.1, 17, 0.0});
  const auto r = train_head(random_model(18), concat(clean, extra, true), quick_config());
  EXPECT_EQ(r.log.back().clean_count, clean.size());
  EXPECT_EQ(r.log.back().poison_count, extra.size());
}

TEST(ModelTest, ShadowEncoderHasRequestedShape) {
  const std::size_t widths[] = {6, 12, 5};
  TrainConfig cfg = quick_config();
  const EncoderModel e = train_encoder_on_shadow(small_fixture(19), widths, cfg);
  EXPECT_EQ(e.latent_dim(), 5u);
  EXPECT_EQ(e.net.depth(), 2u);
  EXPECT_TRUE(e.frozen);
  EXPECT_EQ(e.provenance, EncoderProvenance::trained_on_shadow);
  const std::size_t bad[] = {7, 5};
  EXPECT_THROW(train_encoder_on_shadow(small_fixture(19), bad, cfg), DimensionError);
}

TEST(ModelTest, MakeModelUsesHiddenWidth) {
  TrainConfig cfg = quick_config();
  cfg.hidden_width = 11;
  const ComposedModel m = make_model(EncoderModel::identity(6), 4, cfg);
  EXPECT_EQ(m.head.hidden_width(), 11u);
  EXPECT_EQ(m.class_count(), 4u);
}

TEST(SerializeTest, RoundTripPredictsIdentically) {
  test_support::TempDir dir("model_rt");
  ComposedModel m = random_model(20);
  m.encoder.provenance = EncoderProvenance::trained_on_shadow;
  save_model(m, dir / "m.bin");
  const ComposedModel back = load_model(dir / "m.bin");
  EXPECT_EQ(back.encoder.provenance, EncoderProvenance::trained_on_shadow);
  EXPECT_EQ(back.encoder.frozen, m.encoder.frozen);
  const Tensor2 x = small_fixture(21).features();
  EXPECT_EQ(predict(back, x), predict(m, x));
}

TEST(SerializeTest, IdentityEncoderRoundTrips) {
  Rng rng(22);
  const ComposedModel m{EncoderModel::identity(6), ClassifierHead::make(6, 3, rng, 4)};
  const auto bytes = encode_model(m);
  ByteReader r(bytes, "mem");
  const ComposedModel back = decode_model(r);
  EXPECT_TRUE(back.encoder.net.empty());
  EXPECT_EQ(back.input_dim(), 6u);
  EXPECT_EQ(parameter_checksum(back.head.net), parameter_checksum(m.head.net));
}

TEST(SerializeTest, CorruptionIsRejected) {
  const auto bytes = encode_model(random_model(23));
  auto bad = bytes;
  bad[0] = 'Z';
  ByteReader r1(bad, "bad");
  EXPECT_THROW(decode_model(r1), FormatError);
  auto cut = bytes;
  cut.resize(cut.size() - 1);
  ByteReader r2(cut, "cut");
  EXPECT_THROW(decode_model(r2), FormatError);
  auto extra = bytes;
  extra.push_back(0);
  ByteReader r3(extra, "extra");
  EXPECT_THROW(decode_model(r3), FormatError);
}

}  // namespace
}  // namespace memx
