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
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "memx/data/gaussian.hpp"
#include "memx/poison/box_transform.hpp"
#include "memx/poison/collision.hpp"
#include "memx/poison/export.hpp"
#include "memx/poison/poison.hpp"
#include "support/gradcheck.hpp"
#include "support/tempdir.hpp"

namespace memx {
namespace {

// Chi-square critical value for 3 degrees of freedom at alpha = 0.01.
constexpr double kChi2Df3Alpha01 = 11.344867;

Dataset single_class_rows(int classes, int t, std::size_t n) {
  Tensor2 x(n, 2, 0.5);
  return Dataset(std::move(x), std::vector<int>(n, t), classes);
}

TEST(DirtyLabelTest, FlipsOnlyClassTRowsAndKeepsFeatures) {
  Dataset shadow = gen_gaussian({10, 3, 10, 0.1, 1, 0.0});
  PoisonRecipe r;
  r.target_class = 4;
  r.budget = 5;
  r.seed = 2;
  const PoisonSet p = dirty_label_poison(shadow, r);
  ASSERT_EQ(p.size(), 5u);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NE(p.examples.labels()[i], 4);
    EXPECT_EQ(p.original_labels[i], 4);
    EXPECT_EQ(shadow.labels()[p.source_rows[i]], 4);
    EXPECT_EQ(p.provenance[i], Provenance::flipped);
    const auto a = p.examples.features().row(i);
    const auto b = shadow.features().row(p.source_rows[i]);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST(DirtyLabelTest, TwoClassesForceTheOtherLabel) {
  const PoisonSet p = dirty_label_poison(single_class_rows(2, 1, 20), {1, 20});
  for (int y : p.examples.labels()) EXPECT_EQ(y, 0);
}

TEST(DirtyLabelTest, BudgetAboveSupplyTakesAllRows) {
  const PoisonSet p = dirty_label_poison(single_class_rows(3, 0, 4), {0, 100});
  EXPECT_EQ(p.size(), 4u);
}

TEST(DirtyLabelTest, RelabelIsUniformChiSquare) {
  const int classes = 5, t = 2;
  const std::size_t n = 10000;
  PoisonRecipe r;
  r.target_class = t;
  r.budget = n;
  r.seed = 3;
  const PoisonSet p = dirty_label_poison(single_class_rows(classes, t, n), r);
  std::vector<double> counts(classes, 0.0);
  for (int y : p.examples.labels()) counts[static_cast<std::size_t>(y)] += 1.0;
  EXPECT_EQ(counts[t], 0.0);
  const double expected = static_cast<double>(n) / (classes - 1);
  double chi2 = 0.0;
  for (int c = 0; c < classes; ++c) {
    if (c == t) continue;
    chi2 += (counts[c] - expected) * (counts[c] - expected) / expected;
  }
  EXPECT_LT(chi2, kChi2Df3Alpha01);
}

TEST(DirtyLabelTest, RecipeIsValidated) {
  const Dataset s = single_class_rows(3, 0, 4);
  EXPECT_THROW(dirty_label_poison(s, {3, 1}), ArgumentError);
  EXPECT_THROW(dirty_label_poison(s, {0, 0}), ArgumentError);
  EXPECT_EQ(parse_poison_mode("clean"), PoisonMode::clean);
  EXPECT_THROW(parse_poison_mode("blended"), ConfigError);
}

TEST(BoxTransformTest, DecodeExamples) {
  const Box box{{0.2, 0.0}, {0.6, 1.0}};
  const std::vector<double> zero{0.0, 0.0};
  const auto mid = decode(zero, box);
  EXPECT_DOUBLE_EQ(mid[0], 0.4);
  EXPECT_DOUBLE_EQ(mid[1], 0.5);
  const auto hi = decode(std::vector<double>{20.0, 20.0}, box);
  const auto lo = decode(std::vector<double>{-20.0, -20.0}, box);
  EXPECT_NEAR(hi[0], 0.6, 1e-8);
  EXPECT_NEAR(lo[1], 0.0, 1e-8);
}

TEST(BoxTransformTest, RoundTripOfInteriorPoints) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(6);
    for (double& v : x) v = rng.uniform();
    const Box box = Box::around(x, rng.uniform(0.01, 0.3));
    std::vector<double> p(6);
    for (std::size_t i = 0; i < 6; ++i) {
      p[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * rng.uniform(0.01, 0.99);
    }
    const auto back = decode(encode(p, box, false), box);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(back[i], p[i], 1e-9);
  }
}

TEST(BoxTransformTest, EncodeOutsideWithoutClampIsDomainError) {
  const Box box{{0.2}, {0.6}};
  EXPECT_THROW(encode(std::vector<double>{0.6}, box, false), DomainError);
  EXPECT_THROW(encode(std::vector<double>{0.9}, box, false), DomainError);
  const auto w = encode(std::vector<double>{0.9}, box, true);
  EXPECT_TRUE(std::isfinite(w[0]));
  EXPECT_NEAR(decode(w, box)[0], 0.6, 1e-6);
}

TEST(BoxTransformTest, BoxClipsToUnitCube) {
  const Box b = Box::around(std::vector<double>{0.01, 0.99}, 0.1);
  EXPECT_EQ(b.lo[0], 0.0);
  EXPECT_EQ(b.hi[1], 1.0);
  EXPECT_THROW(Box::around(std::vector<double>{0.5}, 0.0), ArgumentError);
}

TEST(CollisionTest, IdentityEncoderReachesBaseInsideBox) {
  CollisionProblem p;
  p.x = {0.5, 0.5, 0.5};
  p.x_base = {0.3, 0.7, 0.55};
  p.epsilon = 0.4;
  const auto r = craft_collision(p, EncoderModel::identity(3));
  EXPECT_LT(r.final_objective, 1e-3);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.x_star[i], p.x_base[i], 1e-3);
}

// With the identity encoder the optimum is the projection of x_base onto
// the box, so the best reachable objective is the distance to that point.
TEST(CollisionTest, IdentityEncoderMatchesProjectionOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    CollisionProblem p;
    p.x.resize(4);
    p.x_base.resize(4);
    for (double& v : p.x) v = rng.uniform();
    for (double& v : p.x_base) v = rng.uniform();
    p.epsilon = 0.1;
    const Box box = p.box();
    double oracle = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const double proj = std::clamp(p.x_base[i], box.lo[i], box.hi[i]);
      oracle += (proj - p.x_base[i]) * (proj - p.x_base[i]);
    }
    oracle = std::sqrt(oracle);
    const auto r = craft_collision(p, EncoderModel::identity(4));
    EXPECT_GE(r.final_objective, oracle - 1e-12);
    EXPECT_LT(r.final_objective, oracle + 1e-3);
  }
}

TEST(CollisionTest, ZeroIterationsReturnsClampedInitialization) {
  CollisionProblem p;
  p.x = {0.5, 0.5};
  p.x_base = {0.0, 0.52};
  p.epsilon = 0.1;
  p.iterations = 0;
  const auto r = craft_collision(p, EncoderModel::identity(2));
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.best_iteration, 0);
  EXPECT_NEAR(r.x_star[0], 0.4, 1e-6);
  EXPECT_NEAR(r.x_star[1], 0.52, 1e-9);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE(std::abs(r.x_star[i] - p.x[i]), p.epsilon);
}

TEST(CollisionTest, RandomEncoderImprovesOnCarrierInMostTrials) {
  Rng rng(6);
  int improved = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t widths[] = {8, 16, 4};
    const EncoderModel enc = EncoderModel::random(widths, rng);
    CollisionProblem p;
    p.x.resize(8);
    p.x_base.resize(8);
    for (double& v : p.x) v = rng.uniform();
    for (double& v : p.x_base) v = rng.uniform();
    CollisionOptions opt;
    opt.check_box = true;
    const auto r = craft_collision(p, enc, opt);
    const Tensor2 gx = enc.encode(Tensor2::from_row(p.x));
    const Tensor2 gb = enc.encode(Tensor2::from_row(p.x_base));
    const double carrier = std::sqrt(squared_l2(gx.row(0), gb.row(0)));
    improved += r.final_objective < carrier;
    EXPECT_LE(r.final_objective, r.initial_objective);
    ASSERT_EQ(r.trace.size(), 1000u);
  }
  EXPECT_GE(improved, 95);
}

TEST(CollisionTest, EveryIterateStaysInBox) {
  Rng rng(7);
  const std::size_t widths[] = {5, 6};
  const EncoderModel enc = EncoderModel::random(widths, rng);
  CollisionProblem p;
  p.x = {0.0, 1.0, 0.5, 0.02, 0.97};
  p.x_base = {1.0, 0.0, 0.1, 0.9, 0.2};
  p.iterations = 300;
  p.learning_rate = 0.5;
  int seen = 0;
  CollisionOptions opt;
  opt.on_iterate = [&](int, std::span<const double> xp) {
    ++seen;
    for (std::size_t i = 0; i < xp.size(); ++i) {
      ASSERT_LE(std::abs(xp[i] - p.x[i]), p.epsilon + 1e-12);
      ASSERT_GE(xp[i], 0.0);
      ASSERT_LE(xp[i], 1.0);
    }
  };
  craft_collision(p, enc, opt);
  EXPECT_EQ(seen, 300);
}

TEST(CollisionTest, ObjectiveGradientsMatchFiniteDifferences) {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t widths[] = {5, 7, 3};
    const EncoderModel enc = EncoderModel::random(widths, rng);
    std::vector<double> x(5), target(3);
    for (double& v : x) v = rng.uniform(0.1, 0.9);
    for (double& v : target) v = rng.uniform(-0.5, 0.5);
    const auto gx = collision_objective(enc, x, target);
    const double ex = test_support::max_fd_error(
        [&](std::span<const double> p) { return collision_objective(enc, p, target).value; }, x,
        gx.grad_x);
    EXPECT_LT(ex, test_support::kGradRelTol);

    const Box box = Box::around(x, 0.2);
    std::vector<double> w(5);
    for (double& v : w) v = rng.uniform(-2.0, 2.0);
    const auto gw = collision_objective_w(enc, w, box, target);
    const double ew = test_support::max_fd_error(
        [&](std::span<const double> p) {
          return collision_objective_w(enc, p, box, target).value;
        },
        w, gw.grad_x);
    EXPECT_LT(ew, test_support::kGradRelTol);
  }
}

TEST(CollisionTest, ArgumentsAreValidated) {
  CollisionProblem p;
  p.x = {0.5};
  p.x_base = {0.5, 0.5};
  EXPECT_THROW(craft_collision(p, EncoderModel::identity(1)), DimensionError);
  p.x_base = {0.5};
  p.iterations = -1;
  EXPECT_THROW(craft_collision(p, EncoderModel::identity(1)), ArgumentError);
  p.iterations = 1;
  p.epsilon = 1.5;
  EXPECT_THROW(craft_collision(p, EncoderModel::identity(1)), ArgumentError);
}

PoisonRecipe clean_recipe(int t, std::size_t budget) {
  PoisonRecipe r;
  r.mode = PoisonMode::clean;
  r.target_class = t;
  r.budget = budget;
  r.iterations = 20;
  r.seed = 8;
  return r;
}

TEST(CleanLabelTest, OnePerLabelGivesCollisionsPlusFiller) {
  const Dataset shadow = gen_gaussian({10, 4, 3, 0.1, 9, 0.0});
  const PoisonSet p = clean_label_poison(shadow, clean_recipe(3, 10), EncoderModel::identity(4));
  ASSERT_EQ(p.size(), 10u);
  int collisions = 0, fillers = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int y = p.examples.labels()[i];
    EXPECT_EQ(y, shadow.labels()[p.source_rows[i]]);
    EXPECT_EQ(y, p.original_labels[i]);
    if (p.provenance[i] == Provenance::collision) {
      ++collisions;
      EXPECT_NE(y, 3);
      EXPECT_EQ(shadow.labels()[p.base_rows[i]], 3);
      EXPECT_LE(p.final_objectives[static_cast<std::size_t>(collisions - 1)],
                p.initial_objectives[static_cast<std::size_t>(collisions - 1)]);
    } else {
      ++fillers;
      EXPECT_EQ(y, 3);
    }
  }
  EXPECT_EQ(collisions, 9);
  EXPECT_EQ(fillers, 1);
}

TEST(CleanLabelTest, SlotArithmetic) {
  EXPECT_EQ(label_slots(1000, 10), std::vector<std::size_t>(10, 100));
  EXPECT_EQ(label_slots(7, 3), (std::vector<std::size_t>{3, 2, 2}));
}

TEST(CleanLabelTest, WithoutFillersOnlyCollisions) {
  const Dataset shadow = gen_gaussian({4, 2, 5, 0.1, 10, 0.0});
  PoisonRecipe r = clean_recipe(0, 8);
  r.balance_with_normals = false;
  const PoisonSet p = clean_label_poison(shadow, r, EncoderModel::identity(2));
  EXPECT_EQ(p.size(), 6u);
  for (auto pr : p.provenance) EXPECT_EQ(pr, Provenance::collision);
}

TEST(CleanLabelTest, CapacityShortfallNamesLabel) {
  const Dataset shadow = gen_gaussian({3, 2, 2, 0.1, 11, 0.0});
  try {
    clean_label_poison(shadow, clean_recipe(0, 9), EncoderModel::identity(2));
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("label 1"), std::string::npos);
  }
}

TEST(CleanLabelTest, WorkersDoNotChangeResult) {
  const Dataset shadow = gen_gaussian({5, 3, 6, 0.1, 12, 0.0});
  Rng rng(13);
  const std::size_t widths[] = {3, 5};
  const EncoderModel enc = EncoderModel::random(widths, rng);
  PoisonRecipe r = clean_recipe(1, 10);
  const PoisonSet a = clean_label_poison(shadow, r, enc);
  r.workers = 3;
  const PoisonSet b = clean_label_poison(shadow, r, enc);
  EXPECT_EQ(a.examples.features(), b.examples.features());
}

TEST(PoisonExportTest, WritesCsvBinaryAndManifest) {
  test_support::TempDir dir("poison_export");
  const Dataset shadow = gen_gaussian({4, 2, 5, 0.1, 14, 0.0});
  const PoisonRecipe r = clean_recipe(2, 4);
  const PoisonSet p = clean_label_poison(shadow, r, EncoderModel::identity(2));
  export_poison(p, r, dir.path());
  std::ifstream csv(dir / "poison.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "provenance,label,original_label,source_row,x0,x1");
  const FeatureTable t = read_memx1(dir / "poison.memx1");
  EXPECT_EQ(t.features, p.examples.features());
  const auto j = nlohmann::json::parse(std::ifstream(dir / "poison_manifest.json"));
  EXPECT_EQ(j["mode"], "clean");
  EXPECT_EQ(j["provenance_counts"]["collision"], 3);
  EXPECT_EQ(j["provenance_counts"]["normal_filler"], 1);
  EXPECT_EQ(j["objective"]["iterations"], 20);
}

}  // namespace
}  // namespace memx
