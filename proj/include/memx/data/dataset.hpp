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
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/tensor.hpp"

namespace memx {

struct LabeledExample {
  std::vector<double> x;
  int y = 0;
};

// Labeled feature matrix without range restrictions. Used for latent
// features and binary dumps.
struct FeatureTable {
  Tensor2 features;
  std::vector<int> labels;
  int class_count = 0;
};

// Immutable collection of examples with features in [0, 1] and labels in
// [0, class_count). An optional poison mask marks injected rows of a
// training set.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Tensor2 features, std::vector<int> labels, int class_count,
          std::vector<std::uint8_t> poison_mask = {})
      : features_(std::move(features)),
        labels_(std::move(labels)),
        poison_mask_(std::move(poison_mask)),
        class_count_(class_count) {
    if (labels_.size() != features_.rows()) {
      throw DimensionError("Dataset: " + std::to_string(labels_.size()) +
                           " labels for " + std::to_string(features_.rows()) +
                           " feature rows");
    }
    if (!poison_mask_.empty() && poison_mask_.size() != labels_.size()) {
      throw DimensionError("Dataset: poison mask length mismatch");
    }
    if (class_count_ < 1) throw ArgumentError("Dataset: class_count must be >= 1");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] < 0 || labels_[i] >= class_count_) {
        throw ArgumentError("Dataset: label " + std::to_string(labels_[i]) +
                            " at row " + std::to_string(i) + " outside [0, " +
                            std::to_string(class_count_) + ")");
      }
    }
    const auto flat = features_.flat();
    for (std::size_t k = 0; k < flat.size(); ++k) {
      if (!(flat[k] >= 0.0 && flat[k] <= 1.0)) {
        throw DomainError("Dataset: feature " + std::to_string(flat[k]) +
                          " at row " + std::to_string(k / features_.cols()) +
                          " outside [0, 1]");
      }
    }
  }

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t feature_dim() const { return features_.cols(); }
  int class_count() const { return class_count_; }

  const Tensor2& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::uint8_t>& poison_mask() const { return poison_mask_; }
  bool has_poison_mask() const { return !poison_mask_.empty(); }
  bool is_poison(std::size_t i) const {
    return !poison_mask_.empty() && poison_mask_[i] != 0;
  }

  LabeledExample example(std::size_t i) const {
    const auto r = features_.row(i);
    return {std::vector<double>(r.begin(), r.end()), labels_[i]};
  }

  std::vector<std::size_t> class_indices(int c) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == c) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(class_count_), 0);
    for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
    return counts;
  }

  Dataset subset(std::span<const std::size_t> idx) const {
    std::vector<int> labels;
    labels.reserve(idx.size());
    std::vector<std::uint8_t> mask;
    for (std::size_t i : idx) {
      labels.push_back(labels_.at(i));
      if (!poison_mask_.empty()) mask.push_back(poison_mask_[i]);
    }
    return Dataset(gather_rows(features_, idx), std::move(labels), class_count_,
                   std::move(mask));
  }

  Dataset with_poison_mask(std::vector<std::uint8_t> mask) const {
    return Dataset(features_, labels_, class_count_, std::move(mask));
  }

  FeatureTable table() const { return {features_, labels_, class_count_}; }

 private:
  Tensor2 features_;
  std::vector<int> labels_;
  std::vector<std::uint8_t> poison_mask_;
  int class_count_ = 0;
};

// Rows of `a` followed by rows of `b`. Rows of `b` are flagged as poison
// when `b_is_poison` is set; the mask is kept only if either side has one.
inline Dataset concat(const Dataset& a, const Dataset& b, bool b_is_poison = false) {
  if (!a.empty() && !b.empty() && a.feature_dim() != b.feature_dim()) {
    throw DimensionError("concat: feature dims differ");
  }
  if (a.class_count() != b.class_count() && !a.empty() && !b.empty()) {
    throw ArgumentError("concat: class counts differ");
  }
  const std::size_t d = a.empty() ? b.feature_dim() : a.feature_dim();
  std::vector<double> data;
  data.reserve((a.size() + b.size()) * d);
  data.insert(data.end(), a.features().flat().begin(), a.features().flat().end());
  data.insert(data.end(), b.features().flat().begin(), b.features().flat().end());
  std::vector<int> labels = a.labels();
  labels.insert(labels.end(), b.labels().begin(), b.labels().end());
  std::vector<std::uint8_t> mask;
  if (b_is_poison || a.has_poison_mask() || b.has_poison_mask()) {
    for (std::size_t i = 0; i < a.size(); ++i) mask.push_back(a.is_poison(i));
    for (std::size_t i = 0; i < b.size(); ++i) {
      mask.push_back(b_is_poison ? 1 : b.is_poison(i));
    }
  }
  const int c = std::max(a.class_count(), b.class_count());
  return Dataset(Tensor2(a.size() + b.size(), d, std::move(data)),
                 std::move(labels), c, std::move(mask));
}

}  // namespace memx
