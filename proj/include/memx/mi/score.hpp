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

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/loss.hpp"
#include "memx/core/tensor.hpp"

namespace memx {

// Membership score of one prediction row with true label y:
//
//   M = -(1 - p_y) log p_y - sum_{i != y} p_i log(1 - p_i)
//
// Natural log; every probability is clipped into [1e-12, 1 - 1e-12] first.
// M is zero for a confident correct prediction and grows with error and
// uncertainty, so training members tend to score lower.
inline double mem_score(std::span<const double> probs, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= probs.size()) {
    throw ArgumentError("mem_score: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(probs.size()) + ")");
  }
  double sum = 0.0;
  for (double p : probs) sum += p;
  if (!(std::abs(sum - 1.0) <= 1e-6)) {
    throw ArgumentError("mem_score: probability row sums to " + std::to_string(sum));
  }
  double score = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = clip_probability(probs[i]);
    if (static_cast<int>(i) == y) {
      score -= (1.0 - p) * std::log(p);
    } else {
      score -= p * std::log(1.0 - p);
    }
  }
  return score;
}

// Attack statistic handed to roc(), whose rule is "member iff s >= tau".
// Negating M keeps that rule while flagging low-M samples as members.
inline double membership_statistic(double m) { return -m; }

inline std::vector<double> mem_scores(const Tensor2& probs, std::span<const int> labels) {
  if (labels.size() != probs.rows()) throw DimensionError("mem_scores: label count mismatch");
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = mem_score(probs.row(i), labels[i]);
  return out;
}

}  // namespace memx
