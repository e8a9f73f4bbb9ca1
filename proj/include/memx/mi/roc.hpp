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
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "memx/core/error.hpp"

namespace memx {

struct MIScore {
  std::size_t id = 0;
  bool member = false;
  double score = 0.0;
  int label = 0;
};

struct RocPoint {
  double tau = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct ROCReport {
  std::vector<RocPoint> points;  // tau descending; fpr and tpr non-decreasing
  double auc = 0.0;
  std::map<double, double> tpr_at_fpr;
  std::size_t members = 0;
  std::size_t non_members = 0;
};

// TPR of the sweep point with the largest FPR <= cap (step rule, no
// interpolation).
inline double tpr_at_fpr(const ROCReport& report, double cap) {
  double best = 0.0;
  for (const auto& p : report.points) {
    if (p.fpr <= cap) best = std::max(best, p.tpr);
  }
  return best;
}

// Threshold sweep with the rule "member iff score >= tau". Thresholds are
// +inf, every distinct score in descending order, then -inf; equal scores
// enter in a single step. The AUC is the trapezoidal area of those points,
// accumulated in integer units so that it equals the Mann-Whitney statistic
// with ties counted 1/2.
inline ROCReport roc(std::span<const MIScore> scores,
                     std::span<const double> fpr_caps = {}) {
  std::size_t pos = 0, neg = 0;
  for (const auto& s : scores) {
    if (std::isnan(s.score)) throw ArgumentError("roc: NaN score for sample " + std::to_string(s.id));
    (s.member ? pos : neg)++;
  }
  if (pos == 0 || neg == 0) {
    throw ArgumentError("roc: need at least one member and one non-member");
  }
  std::vector<const MIScore*> order;
  order.reserve(scores.size());
  for (const auto& s : scores) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(),
                   [](const MIScore* a, const MIScore* b) { return a->score > b->score; });

  ROCReport r;
  r.members = pos;
  r.non_members = neg;
  const double inf = std::numeric_limits<double>::infinity();
  r.points.push_back({inf, 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  // Twice the area in units of 1 / (pos * neg).
  unsigned __int128 area2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t dtp = 0, dfp = 0;
    while (j < order.size() && order[j]->score == order[i]->score) {
      (order[j]->member ? dtp : dfp)++;
      ++j;
    }
    area2 += static_cast<unsigned __int128>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    r.points.push_back({order[i]->score, static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  r.points.push_back({-inf, 1.0, 1.0});
  r.auc = static_cast<double>(area2) /
          (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  for (double cap : fpr_caps) r.tpr_at_fpr[cap] = tpr_at_fpr(r, cap);
  return r;
}

// Trapezoidal area of the stored points, computed in floating point.
inline double trapezoid_area(const ROCReport& r) {
  double a = 0.0;
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    a += (r.points[i].fpr - r.points[i - 1].fpr) *
         (r.points[i].tpr + r.points[i - 1].tpr) * 0.5;
  }
  return a;
}

}  // namespace memx
