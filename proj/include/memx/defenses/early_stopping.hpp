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

#include <limits>

#include "memx/core/error.hpp"

namespace memx {

// Tracks validation losses. An epoch counts as an improvement only when its
// loss is strictly below the running best; training stops once `patience`
// consecutive epochs pass without one.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ArgumentError("EarlyStopping: patience must be >= 1");
  }

  // Records the loss of the next epoch (1-based). Returns true when training
  // should stop after this epoch.
  bool observe(double val_loss) {
    ++epoch_;
    if (val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch_;
      since_best_ = 0;
      return false;
    }
    ++since_best_;
    return since_best_ >= patience_;
  }

  bool last_was_best() const { return best_epoch_ == epoch_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  int epochs_seen() const { return epoch_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

}  // namespace memx
