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

// Umbrella header.

#include "memx/core/bytes.hpp"
#include "memx/core/error.hpp"
#include "memx/core/layer.hpp"
#include "memx/core/loss.hpp"
#include "memx/core/optimizer.hpp"
#include "memx/core/parallel.hpp"
#include "memx/core/rng.hpp"
#include "memx/core/tensor.hpp"
#include "memx/data/binary_cache.hpp"
#include "memx/data/csv.hpp"
#include "memx/data/dataset.hpp"
#include "memx/data/gaussian.hpp"
#include "memx/data/idx.hpp"
#include "memx/data/splits.hpp"
#include "memx/defenses/config.hpp"
#include "memx/defenses/dpsgd.hpp"
#include "memx/defenses/early_stopping.hpp"
#include "memx/defenses/l2.hpp"
#include "memx/diagnostics/heuristic.hpp"
#include "memx/harness/config.hpp"
#include "memx/harness/experiment.hpp"
#include "memx/harness/report.hpp"
#include "memx/mi/evaluate.hpp"
#include "memx/mi/export.hpp"
#include "memx/mi/roc.hpp"
#include "memx/mi/score.hpp"
#include "memx/model/composed.hpp"
#include "memx/model/serialize.hpp"
#include "memx/model/trainer.hpp"
#include "memx/poison/box_transform.hpp"
#include "memx/poison/collision.hpp"
#include "memx/poison/export.hpp"
#include "memx/poison/poison.hpp"
