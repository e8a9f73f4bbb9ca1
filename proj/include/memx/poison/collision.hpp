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
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/layer.hpp"
#include "memx/core/optimizer.hpp"
#include "memx/model/composed.hpp"
#include "memx/poison/box_transform.hpp"

namespace memx {

// Feature-collision search for one carrier: find x' in the eps-box around
// x whose encoding is closest (L2) to that of x_base.
struct CollisionProblem {
  std::vector<double> x;
  int y = 0;
  std::vector<double> x_base;
  double epsilon = 16.0 / 255.0;
  int iterations = 1000;
  double learning_rate = 0.01;

  Box box() const { return Box::around(x, epsilon); }
};

struct CollisionOptions {
  // Verify the box invariant on every iterate and throw StateError on a
  // violation.
  bool check_box = false;
  // Called with (iteration, decoded iterate) after each update.
  std::function<void(int, std::span<const double>)> on_iterate;
};

struct CollisionResult {
  std::vector<double> x_star;
  std::vector<double> trace;  // objective after each update
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int best_iteration = 0;     // 0 means the initialization was never beaten
};

struct CollisionObjective {
  double value = 0.0;
  std::vector<double> grad_x;  // d value / d x'
};

// ||g(x') - target||_2 and its gradient w.r.t. x'.
inline CollisionObjective collision_objective(const EncoderModel& encoder,
                                              std::span<const double> x_prime,
                                              std::span<const double> target_latent) {
  const Tensor2 in = Tensor2::from_row(x_prime);
  CollisionObjective out;
  if (encoder.net.empty()) {
    std::vector<double> diff(x_prime.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = x_prime[i] - target_latent[i];
    out.value = std::sqrt(squared_l2(x_prime, target_latent));
    out.grad_x.resize(diff.size(), 0.0);
    if (out.value > 0.0) {
      for (std::size_t i = 0; i < diff.size(); ++i) out.grad_x[i] = diff[i] / out.value;
    }
    return out;
  }
  const auto pass = forward(encoder.net, in);
  const auto z = pass.output().row(0);
  out.value = std::sqrt(squared_l2(z, target_latent));
  Tensor2 dz(1, z.size());
  if (out.value > 0.0) {
    for (std::size_t i = 0; i < z.size(); ++i) dz(0, i) = (z[i] - target_latent[i]) / out.value;
  }
  const auto grads = backward(encoder.net, pass, dz);
  out.grad_x.assign(grads.input.flat().begin(), grads.input.flat().end());
  return out;
}

// Objective and gradient w.r.t. the substitution variable w.
inline CollisionObjective collision_objective_w(const EncoderModel& encoder,
                                                std::span<const double> w, const Box& box,
                                                std::span<const double> target_latent) {
  const auto x_prime = decode(w, box);
  auto obj = collision_objective(encoder, x_prime, target_latent);
  const auto jac = decode_jacobian(w, box);
  for (std::size_t i = 0; i < jac.size(); ++i) obj.grad_x[i] *= jac[i];
  return obj;
}

// Adam in w-space starting from the projection of x_base onto the box. The
// returned point is the best iterate seen (initialization included), so the
// final objective never exceeds the initial one.
inline CollisionResult craft_collision(const CollisionProblem& problem,
                                       const EncoderModel& encoder,
                                       const CollisionOptions& options = {}) {
  if (problem.x.size() != problem.x_base.size()) {
    throw DimensionError("craft_collision: carrier/base size mismatch");
  }
  if (problem.x.size() != encoder.input_dim) {
    throw DimensionError("craft_collision: carrier dim does not match encoder");
  }
  if (problem.iterations < 0) throw ArgumentError("craft_collision: iterations < 0");
  if (!(problem.epsilon > 0.0 && problem.epsilon <= 1.0)) {
    throw ArgumentError("craft_collision: epsilon must lie in (0, 1]");
  }

  const Box box = problem.box();
  const Tensor2 base_latent = encoder.encode(Tensor2::from_row(problem.x_base));
  const auto target = base_latent.row(0);

  auto check = [&](std::span<const double> xp, int iter) {
    if (!options.check_box) return;
    for (std::size_t i = 0; i < xp.size(); ++i) {
      if (std::abs(xp[i] - problem.x[i]) > problem.epsilon + 1e-12 || xp[i] < 0.0 ||
          xp[i] > 1.0) {
        throw StateError("craft_collision: iterate " + std::to_string(iter) +
                         " leaves the box at component " + std::to_string(i));
      }
    }
  };

  std::vector<double> w = encode(problem.x_base, box, /*clamp=*/true);
  CollisionResult result;
  result.x_star = decode(w, box);
  check(result.x_star, 0);
  auto obj = collision_objective_w(encoder, w, box, target);
  result.initial_objective = obj.value;
  result.final_objective = obj.value;

  OptimizerState adam = OptimizerState::adam(problem.learning_rate);
  result.trace.reserve(static_cast<std::size_t>(problem.iterations));
  for (int it = 1; it <= problem.iterations; ++it) {
    for (double g : obj.grad_x) {
      if (!std::isfinite(g)) {
        throw NumericError("craft_collision: non-finite gradient at iteration " +
                           std::to_string(it));
      }
    }
    const ParamView p{"w", w};
    const ParamView g{"w", obj.grad_x};
    optimizer_step(adam, std::span(&p, 1), std::span(&g, 1));

    auto xp = decode(w, box);
    check(xp, it);
    if (options.on_iterate) options.on_iterate(it, xp);
    obj = collision_objective_w(encoder, w, box, target);
    if (!std::isfinite(obj.value)) {
      throw NumericError("craft_collision: non-finite objective at iteration " +
                         std::to_string(it));
    }
    result.trace.push_back(obj.value);
    if (obj.value < result.final_objective) {
      result.final_objective = obj.value;
      result.x_star = std::move(xp);
      result.best_iteration = it;
    }
  }
  return result;
}

}  // namespace memx
