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
#include "memx/defenses/config.hpp"
#include "memx/defenses/dpsgd.hpp"
#include "memx/defenses/early_stopping.hpp"
#include "memx/defenses/l2.hpp"
#include "memx/model/trainer.hpp"
#include "support/gradcheck.hpp"

namespace memx {
namespace {

TEST(EarlyStoppingTest, StopsAfterPatienceWithoutImprovement) {
  EarlyStopping es(3);
  const double losses[] = {1.0, 0.9, 0.95, 0.96, 0.97};
  int stopped_at = 0;
  for (double l : losses) {
    if (es.observe(l)) {
      stopped_at = es.epochs_seen();
      break;
    }
  }
  EXPECT_EQ(stopped_at, 5);
  EXPECT_EQ(es.best_epoch(), 2);
  EXPECT_DOUBLE_EQ(es.best_loss(), 0.9);
}

TEST(EarlyStoppingTest, EqualLossIsNotAnImprovement) {
  EarlyStopping es(1);
  EXPECT_FALSE(es.observe(1.0));
  EXPECT_TRUE(es.observe(1.0));
  EXPECT_EQ(es.best_epoch(), 1);
  EXPECT_THROW(EarlyStopping(0), ArgumentError);
}

TEST(EarlyStoppingTest, TrainingRestoresBestEpoch) {
  const Dataset d = gen_gaussian({3, 4, 40, 0.2, 1, 0.0});
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 10;
  cfg.learning_rate = 0.05;
  cfg.hidden_width = 16;
  cfg.seed = 2;
  cfg.defense.kind = DefenseKind::early_stop;
  cfg.defense.patience = 2;
  Rng rng(3);
  const ComposedModel m{EncoderModel::identity(4), ClassifierHead::make(4, 3, rng, 16)};
  const TrainResult r = train_head(m, d, cfg);
  ASSERT_GE(r.best_epoch, 1);
  ASSERT_LE(r.best_epoch, r.epochs_run);
  double best = 1e300;
  int arg = 0;
  for (const auto& e : r.log) {
    ASSERT_TRUE(e.validation_loss.has_value());
    if (*e.validation_loss < best) {
      best = *e.validation_loss;
      arg = e.epoch;
    }
  }
  EXPECT_EQ(arg, r.best_epoch);
  if (r.epochs_run < cfg.epochs) {
    EXPECT_EQ(r.epochs_run - r.best_epoch, 2);
  }
}

TEST(L2Test, PenaltyCountsWeightsOnly) {
  Network net({DenseLayer(Tensor2(1, 2, {1.0, 2.0}), {10.0}, Activation::identity)});
  EXPECT_DOUBLE_EQ(l2_regularized_loss(0.5, net, 0.1), 0.5 + 0.1 * 5.0);
  EXPECT_THROW(l2_regularized_loss(0.0, net, -1.0), ArgumentError);
}

TEST(L2Test, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t widths[] = {3, 4, 2};
    Network net = Network::build(widths, Activation::tanh, Activation::identity, rng);
    const double lambda = rng.uniform(0.0, 0.5);
    Gradients g = net.zero_gradients();
    l2_regularized_loss(0.0, net, lambda, &g);
    auto params = net.parameters();
    auto views = g.views();
    for (std::size_t b = 0; b < params.size(); ++b) {
      const auto block = params[b].values;
      const std::vector<double> x0(block.begin(), block.end());
      const double err = test_support::max_fd_error(
          [&](std::span<const double> x) {
            std::copy(x.begin(), x.end(), block.begin());
            return l2_regularized_loss(0.0, net, lambda);
          },
          x0, views[b].values);
      std::copy(x0.begin(), x0.end(), block.begin());
      EXPECT_LT(err, test_support::kGradRelTol) << params[b].name;
    }
  }
}

TEST(DpSgdTest, ClippingBoundsEveryExample) {
  Rng rng(5);
  std::vector<std::vector<double>> grads;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> g(7);
    for (double& v : g) v = rng.normal(0.0, 3.0);
    grads.push_back(g);
  }
  const auto agg = dpsgd_aggregate(grads, 0.5, 0.0, grads.size(), rng);
  EXPECT_LE(agg.max_clipped_norm, 0.5 + 1e-12);
  std::vector<double> small{0.3, 0.4};
  EXPECT_DOUBLE_EQ(clip_to_norm(small, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(small[0], 0.3);
}

TEST(DpSgdTest, NoiseStandardDeviationIsSigmaClipOverLot) {
  Rng rng(6);
  const double sigma = 1.5, clip = 2.0;
  const std::size_t lot = 10;
  const std::vector<std::vector<double>> zero(1, std::vector<double>(20000, 0.0));
  const auto agg = dpsgd_aggregate(zero, clip, sigma, lot, rng);
  double ss = 0.0;
  for (double v : agg.gradient) ss += v * v;
  const double sd = std::sqrt(ss / static_cast<double>(agg.gradient.size()));
  EXPECT_NEAR(sd, sigma * clip / lot, 0.1 * sigma * clip / lot);
}

TEST(DpSgdTest, NoNoiseHugeClipMatchesPlainSgd) {
  const Dataset d = gen_gaussian({3, 4, 20, 0.2, 7, 0.0});
  Rng rng(8);
  const ComposedModel m{EncoderModel::identity(4), ClassifierHead::make(4, 3, rng, 8)};
  TrainConfig plain;
  plain.optimizer = OptimizerKind::sgd;
  plain.learning_rate = 0.01;
  plain.epochs = 5;
  plain.batch_size = 12;
  plain.hidden_width = 8;
  plain.seed = 9;
  TrainConfig dp = plain;
  dp.defense.kind = DefenseKind::dpsgd;
  dp.defense.noise_multiplier = 0.0;
  dp.defense.clip_norm = 1e12;
  dp.defense.dp_learning_rate = 0.01;
  const auto a = train_head(m, d, plain);
  const auto b = train_head(m, d, dp);
  EXPECT_EQ(b.dp_steps, 5u * 5u);
  const auto& la = a.model.head.net.layers();
  const auto& lb = b.model.head.net.layers();
  for (std::size_t l = 0; l < la.size(); ++l) {
    for (std::size_t i = 0; i < la[l].weights.size(); ++i) {
      EXPECT_NEAR(la[l].weights.flat()[i], lb[l].weights.flat()[i], 1e-9);
    }
    for (std::size_t i = 0; i < la[l].bias.size(); ++i) {
      EXPECT_NEAR(la[l].bias[i], lb[l].bias[i], 1e-9);
    }
  }
}

TEST(DpSgdTest, TrainingRecordsClippedNorms) {
  const Dataset d = gen_gaussian({3, 4, 10, 0.2, 10, 0.0});
  Rng rng(11);
  const ComposedModel m{EncoderModel::identity(4), ClassifierHead::make(4, 3, rng, 8)};
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 10;
  cfg.hidden_width = 8;
  cfg.defense.kind = DefenseKind::dpsgd;
  cfg.defense.clip_norm = 0.1;
  const auto r = train_head(m, d, cfg);
  EXPECT_GT(r.max_clipped_norm, 0.0);
  EXPECT_LE(r.max_clipped_norm, 0.1 + 1e-12);
}

TEST(DpSgdTest, ArgumentsAreValidated) {
  Rng rng(12);
  const std::vector<std::vector<double>> g{{1.0}};
  EXPECT_THROW(dpsgd_aggregate(g, 0.0, 1.0, 1, rng), ArgumentError);
  EXPECT_THROW(dpsgd_aggregate(g, 1.0, -1.0, 1, rng), ArgumentError);
  EXPECT_THROW(dpsgd_aggregate(g, 1.0, 1.0, 0, rng), ArgumentError);
  EXPECT_THROW(dpsgd_aggregate({{1.0}, {1.0, 2.0}}, 1.0, 1.0, 2, rng), DimensionError);
}

TEST(DefenseConfigTest, ParsesAndValidates) {
  EXPECT_EQ(parse_defense_kind("dp-sgd"), DefenseKind::dpsgd);
  EXPECT_EQ(parse_defense_kind("early_stop"), DefenseKind::early_stop);
  EXPECT_THROW(parse_defense_kind("dropout"), ConfigError);
  DefenseConfig c;
  c.kind = DefenseKind::early_stop;
  c.val_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.kind = DefenseKind::l2;
  c.l2_penalty = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c.kind = DefenseKind::none;
  EXPECT_NO_THROW(c.validate());
}

}  // namespace
}  // namespace memx
