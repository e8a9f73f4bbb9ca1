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

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/parallel.hpp"
#include "memx/core/rng.hpp"
#include "memx/data/dataset.hpp"
#include "memx/mi/roc.hpp"
#include "memx/mi/score.hpp"
#include "memx/model/composed.hpp"

namespace memx {

inline constexpr double kDefaultFprCap = 0.01;

struct MIEvaluation {
  std::vector<MIScore> scores;
  ROCReport roc;
};

// M_mem of every row of `data` under `model`.
inline std::vector<double> score_dataset(const ComposedModel& model, const Dataset& data) {
  if (data.empty()) return {};
  return mem_scores(predict(model, data.features()), data.labels());
}

// Members are the class-t rows of `clean`, non-members the class-t rows of
// `test`. Ids are row indices, non-members offset by clean.size().
inline MIEvaluation per_class_report(const ComposedModel& model, const Dataset& clean,
                                     const Dataset& test, int t,
                                     std::span<const double> fpr_caps = {}) {
  const auto members = clean.class_indices(t);
  const auto non_members = test.class_indices(t);
  if (members.empty() || non_members.empty()) {
    throw ArgumentError("per_class_report: class " + std::to_string(t) +
                        " is empty in the member or non-member split");
  }
  MIEvaluation ev;
  const auto in_scores = score_dataset(model, clean.subset(members));
  const auto out_scores = score_dataset(model, test.subset(non_members));
  for (std::size_t i = 0; i < members.size(); ++i) {
    ev.scores.push_back({members[i], true, membership_statistic(in_scores[i]), t});
  }
  for (std::size_t i = 0; i < non_members.size(); ++i) {
    ev.scores.push_back(
        {clean.size() + non_members[i], false, membership_statistic(out_scores[i]), t});
  }
  const double default_caps[] = {kDefaultFprCap};
  ev.roc = roc(ev.scores, fpr_caps.empty() ? std::span<const double>(default_caps) : fpr_caps);
  return ev;
}

// Whole-split variant: every row of clean is a member, every row of test a
// non-member.
inline MIEvaluation whole_dataset_report(const ComposedModel& model, const Dataset& clean,
                                         const Dataset& test,
                                         std::span<const double> fpr_caps = {}) {
  MIEvaluation ev;
  const auto in_scores = score_dataset(model, clean);
  const auto out_scores = score_dataset(model, test);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ev.scores.push_back({i, true, membership_statistic(in_scores[i]), clean.labels()[i]});
  }
  for (std::size_t i = 0; i < test.size(); ++i) {
    ev.scores.push_back(
        {clean.size() + i, false, membership_statistic(out_scores[i]), test.labels()[i]});
  }
  const double default_caps[] = {kDefaultFprCap};
  ev.roc = roc(ev.scores, fpr_caps.empty() ? std::span<const double>(default_caps) : fpr_caps);
  return ev;
}

inline double test_accuracy(const ComposedModel& model, const Dataset& test) {
  if (test.empty()) return 0.0;
  const Tensor2 p = predict(model, test.features());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto row = p.row(i);
    if (std::max_element(row.begin(), row.end()) - row.begin() == test.labels()[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------
// Shadow-model likelihood-ratio attack.

using ModelFactory = std::function<ComposedModel(const Dataset& train, std::uint64_t seed)>;

inline constexpr double kShadowVarianceFloor = 1e-6;

struct ShadowAttackConfig {
  int n_shadows = 16;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  // Rows every shadow trains on in addition to its half of the pool (the
  // attacker's own poison set).
  const Dataset* extra_train = nullptr;
  // Restrict the reported ROC to pool rows with this label.
  std::optional<int> eval_class;
};

struct ShadowAttackResult {
  std::vector<MIScore> scores;        // log-likelihood ratios of included rows
  std::vector<std::size_t> in_counts;   // per pool row
  std::vector<std::size_t> out_counts;  // per pool row
  std::size_t excluded = 0;
  ROCReport roc;
};

struct GaussianFit {
  double mean = 0.0;
  double variance = kShadowVarianceFloor;
};

inline GaussianFit fit_gaussian(std::span<const double> xs) {
  GaussianFit f;
  if (xs.empty()) return f;
  double s = 0.0;
  for (double x : xs) s += x;
  f.mean = s / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - f.mean) * (x - f.mean);
  f.variance = std::max(v / static_cast<double>(xs.size()), kShadowVarianceFloor);
  return f;
}

inline double gaussian_log_pdf(double x, const GaussianFit& f) {
  const double d = x - f.mean;
  return -0.5 * std::log(2.0 * 3.14159265358979323846 * f.variance) - d * d / (2.0 * f.variance);
}

// Trains `n_shadows` models, each on an independent random half of `pool`
// (plus cfg.extra_train). For every pool row, Gaussians are fitted to its
// M_mem under the shadows that did (in) and did not (out) train on it; the
// attack score of the target model's M_mem is log N_in - log N_out. Rows
// lacking in- or out-shadows are excluded and counted.
//
// Stream order (Rng(cfg.seed)): one shuffle of the pool indices per shadow,
// shadow 0 first; shadow s trains with seed derive_seed(cfg.seed, 100 + s).
inline ShadowAttackResult shadow_model_attack(const Dataset& pool,
                                              std::span<const std::uint8_t> membership,
                                              const ComposedModel& target,
                                              const ModelFactory& factory,
                                              const ShadowAttackConfig& cfg,
                                              std::span<const double> fpr_caps = {}) {
  if (cfg.n_shadows < 2) throw ArgumentError("shadow_model_attack: need >= 2 shadows");
  if (membership.size() != pool.size()) {
    throw DimensionError("shadow_model_attack: membership flags do not match pool");
  }
  const std::size_t n = pool.size();
  const std::size_t half = n / 2;
  const std::size_t shadows = static_cast<std::size_t>(cfg.n_shadows);

  Rng rng(cfg.seed);
  std::vector<std::vector<std::uint8_t>> in_sets(shadows, std::vector<std::uint8_t>(n, 0));
  for (std::size_t s = 0; s < shadows; ++s) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < half; ++k) in_sets[s][idx[k]] = 1;
  }

  std::vector<std::vector<double>> shadow_scores(shadows);
  parallel_for(shadows, cfg.workers, [&](std::size_t s) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_sets[s][i]) rows.push_back(i);
    }
    Dataset train = pool.subset(rows);
    if (cfg.extra_train != nullptr && !cfg.extra_train->empty()) {
      train = concat(train, *cfg.extra_train, /*b_is_poison=*/true);
    }
    const ComposedModel model = factory(train, derive_seed(cfg.seed, 100 + s));
    shadow_scores[s] = score_dataset(model, pool);
  });

  const auto target_scores = score_dataset(target, pool);
  ShadowAttackResult out;
  out.in_counts.assign(n, 0);
  out.out_counts.assign(n, 0);
  std::vector<double> ins, outs;
  for (std::size_t i = 0; i < n; ++i) {
    ins.clear();
    outs.clear();
    for (std::size_t s = 0; s < shadows; ++s) {
      (in_sets[s][i] ? ins : outs).push_back(shadow_scores[s][i]);
    }
    out.in_counts[i] = ins.size();
    out.out_counts[i] = outs.size();
    if (ins.empty() || outs.empty()) {
      ++out.excluded;
      continue;
    }
    if (cfg.eval_class && pool.labels()[i] != *cfg.eval_class) continue;
    const double llr = gaussian_log_pdf(target_scores[i], fit_gaussian(ins)) -
                       gaussian_log_pdf(target_scores[i], fit_gaussian(outs));
    out.scores.push_back({i, membership[i] != 0, llr, pool.labels()[i]});
  }
  const double default_caps[] = {kDefaultFprCap};
  out.roc = roc(out.scores, fpr_caps.empty() ? std::span<const double>(default_caps) : fpr_caps);
  return out;
}

}  // namespace memx
