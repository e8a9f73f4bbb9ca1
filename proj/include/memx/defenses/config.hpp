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

#include <cstdint>
#include <string>
#include <string_view>

#include "memx/core/error.hpp"

namespace memx {

enum class DefenseKind : std::uint8_t { none = 0, l2 = 1, early_stop = 2, dpsgd = 3 };

inline const char* to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::l2: return "l2";
    case DefenseKind::early_stop: return "early_stop";
    case DefenseKind::dpsgd: return "dpsgd";
    default: return "none";
  }
}

inline DefenseKind parse_defense_kind(std::string_view s) {
  if (s == "none") return DefenseKind::none;
  if (s == "l2") return DefenseKind::l2;
  if (s == "early_stop" || s == "early-stop") return DefenseKind::early_stop;
  if (s == "dpsgd" || s == "dp-sgd") return DefenseKind::dpsgd;
  throw ConfigError("unknown defense kind '" + std::string(s) + "'");
}

// Exactly one countermeasure is active; fields of inactive kinds are
// ignored.
struct DefenseConfig {
  DefenseKind kind = DefenseKind::none;
  double l2_penalty = 0.05;
  int patience = 3;
  double val_fraction = 0.1;
  double clip_norm = 1.0;
  double noise_multiplier = 1.0;
  // Recorded for completeness. Per-example gradients are always computed
  // row by row, which is the finest microbatching.
  std::size_t microbatch_size = 100;
  double dp_learning_rate = 0.01;

  void validate() const {
    switch (kind) {
      case DefenseKind::l2:
        if (!(l2_penalty >= 0.0)) throw ConfigError("defense.l2_penalty must be >= 0");
        break;
      case DefenseKind::early_stop:
        if (patience < 1) throw ConfigError("defense.patience must be >= 1");
        if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
          throw ConfigError("defense.val_fraction must lie in (0, 1)");
        }
        break;
      case DefenseKind::dpsgd:
        if (!(clip_norm > 0.0)) throw ConfigError("defense.clip_norm must be > 0");
        if (!(noise_multiplier >= 0.0)) {
          throw ConfigError("defense.noise_multiplier must be >= 0");
        }
        if (!(dp_learning_rate > 0.0)) {
          throw ConfigError("defense.dp_learning_rate must be > 0");
        }
        break;
      case DefenseKind::none:
        break;
    }
  }
};

}  // namespace memx
