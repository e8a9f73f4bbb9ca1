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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/layer.hpp"
#include "memx/core/loss.hpp"
#include "memx/core/optimizer.hpp"
#include "memx/core/rng.hpp"
#include "memx/data/dataset.hpp"
#include "memx/defenses/config.hpp"
#include "memx/defenses/dpsgd.hpp"
#include "memx/defenses/early_stopping.hpp"
#include "memx/defenses/l2.hpp"
#include "memx/model/composed.hpp"

namespace memx {

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 100;
  int epochs = 30;
  bool fine_tune = false;
  double fine_tune_lr = 1e-5;
  std::size_t hidden_width = 128;
  std::uint64_t seed = 0;
  DefenseConfig defense;

  void validate() const {
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (fine_tune && !(fine_tune_lr > 0.0)) {
      throw ConfigError("train.fine_tune_lr must be > 0");
    }
    if (hidden_width < 1) throw ConfigError("train.hidden_width must be >= 1");
    defense.validate();
  }
};

// Per-epoch training dynamics, measured after the epoch's last update on
// the full training set split by the poison mask.
struct EpochLog {
  int epoch = 0;
  double clean_loss = 0.0;
  double clean_accuracy = 0.0;
  std::size_t clean_count = 0;
  double poison_loss = 0.0;
  double poison_accuracy = 0.0;
  std::size_t poison_count = 0;
  std::optional<double> validation_loss;
};

struct TrainResult {
  ComposedModel model;
  std::vector<EpochLog> log;
  int epochs_run = 0;
  int best_epoch = 0;  // early stopping only
  // DP-SGD bookkeeping: largest per-example gradient norm after clipping
  // across all steps, and the number of noisy steps taken.
  double max_clipped_norm = 0.0;
  std::size_t dp_steps = 0;
};

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Mean cross-entropy and accuracy of `net` on the selected rows.
inline LossAccuracy evaluate_rows(const Network& net, const Tensor2& inputs,
                                  std::span<const int> labels,
                                  std::span<const std::size_t> rows) {
  if (rows.empty()) return {};
  const Tensor2 x = gather_rows(inputs, rows);
  std::vector<int> y;
  y.reserve(rows.size());
  for (std::size_t r : rows) y.push_back(labels[r]);
  const Tensor2 logits = evaluate(net, x);
  const Tensor2 p = softmax_rows(logits);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = p.row(i);
    loss -= std::log(clip_probability(row[static_cast<std::size_t>(y[i])]));
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == y[i]) ++correct;
  }
  const double n = static_cast<double>(rows.size());
  return {loss / n, static_cast<double>(correct) / n};
}

namespace detail {

// Everything the generic fitting loop needs. The first `encoder_blocks`
// parameter blocks of `net` use `encoder_lr` (fine-tuning); the rest use
// the main learning rate.
struct FitJob {
  Network net;
  std::size_t encoder_blocks = 0;
  double encoder_lr = 0.0;
  const Tensor2* inputs = nullptr;
  std::span<const int> labels;
  std::span<const std::uint8_t> poison_mask;
};

struct FitOutcome {
  std::vector<EpochLog> log;
  int epochs_run = 0;
  int best_epoch = 0;
  double max_clipped_norm = 0.0;
  std::size_t dp_steps = 0;
};

inline void check_finite_loss(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    throw NumericError("training diverged: non-finite loss in epoch " +
                       std::to_string(epoch));
  }
}

// RNG streams (all derived from cfg.seed):
//   tag 1: per-epoch validation draw (early stopping) then batch shuffle
//   tag 2: DP-SGD Gaussian noise, one normal per coordinate per step
inline FitOutcome fit(FitJob& job, const TrainConfig& cfg) {
  const std::size_t n = job.labels.size();
  if (n == 0) throw ArgumentError("train: empty training set");
  const DefenseConfig& def = cfg.defense;
  Rng order_rng(derive_seed(cfg.seed, 1));
  Rng noise_rng(derive_seed(cfg.seed, 2));

  const double main_lr =
      def.kind == DefenseKind::dpsgd ? def.dp_learning_rate : cfg.learning_rate;
  OptimizerState head_opt;
  head_opt.kind = cfg.optimizer;
  head_opt.learning_rate = main_lr;
  OptimizerState enc_opt;
  enc_opt.kind = cfg.optimizer;
  enc_opt.learning_rate = job.encoder_lr;

  auto apply = [&](Network& net, std::span<double> flat_grad) {
    auto params = net.parameters();
    auto grads = slice_like(params, flat_grad);
    const std::size_t split = job.encoder_blocks;
    if (split > 0) {
      optimizer_step(enc_opt, std::span(params).first(split),
                     std::span(grads).first(split));
    }
    optimizer_step(head_opt, std::span(params).subspan(split),
                   std::span(grads).subspan(split));
  };

  std::vector<std::size_t> clean_rows;
  std::vector<std::size_t> poison_rows;
  for (std::size_t i = 0; i < n; ++i) {
    (!job.poison_mask.empty() && job.poison_mask[i] ? poison_rows : clean_rows).push_back(i);
  }

  FitOutcome out;
  std::optional<EarlyStopping> stopper;
  Network best_net;
  if (def.kind == DefenseKind::early_stop) {
    if (n < 2) throw ArgumentError("early stopping needs at least 2 training rows");
    stopper.emplace(def.patience);
    best_net = job.net;
  }

  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::vector<std::size_t> val_rows;
    std::span<std::size_t> train_rows(order);
    if (stopper) {
      order_rng.shuffle(std::span<std::size_t>(order));
      std::size_t n_val = static_cast<std::size_t>(
          std::floor(def.val_fraction * static_cast<double>(n)));
      n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
      val_rows.assign(order.begin(), order.begin() + n_val);
      train_rows = std::span<std::size_t>(order).subspan(n_val);
    }
    order_rng.shuffle(train_rows);

    try {
      for (std::size_t start = 0; start < train_rows.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(train_rows.size(), start + cfg.batch_size);
        const auto batch = train_rows.subspan(start, stop - start);
        Tensor2 xb = gather_rows(*job.inputs, batch);
        std::vector<int> yb;
        yb.reserve(batch.size());
        for (std::size_t r : batch) yb.push_back(job.labels[r]);

        if (def.kind == DefenseKind::dpsgd) {
          std::vector<std::vector<double>> per_example;
          per_example.reserve(batch.size());
          double batch_loss = 0.0;
          for (std::size_t i = 0; i < batch.size(); ++i) {
            Tensor2 xi = Tensor2::from_row(xb.row(i));
            const auto pass = forward(job.net, xi);
            const auto xent = softmax_xent(pass.output(), std::span(&yb[i], 1));
            batch_loss += xent.loss;
            auto g = backward(job.net, pass, xent.grad_logits);
            per_example.push_back(flatten(g));
          }
          check_finite_loss(batch_loss, epoch);
          DpAggregate agg = dpsgd_aggregate(std::move(per_example), def.clip_norm,
                                            def.noise_multiplier, batch.size(), noise_rng);
          out.max_clipped_norm = std::max(out.max_clipped_norm, agg.max_clipped_norm);
          ++out.dp_steps;
          apply(job.net, agg.gradient);
        } else {
          const auto pass = forward(job.net, xb);
          const auto xent = softmax_xent(pass.output(), yb);
          check_finite_loss(xent.loss, epoch);
          Gradients g = backward(job.net, pass, xent.grad_logits);
          if (def.kind == DefenseKind::l2) {
            const double total = l2_regularized_loss(xent.loss, job.net, def.l2_penalty, &g);
            check_finite_loss(total, epoch);
          }
          std::vector<double> flat = flatten(g);
          apply(job.net, flat);
        }
      }
    } catch (const NumericError& e) {
      const std::string what = e.what();
      if (what.find("epoch") != std::string::npos) throw;
      throw NumericError(what + " (epoch " + std::to_string(epoch) + ")");
    }

    EpochLog entry;
    entry.epoch = epoch;
    const auto clean = evaluate_rows(job.net, *job.inputs, job.labels, clean_rows);
    entry.clean_loss = clean.loss;
    entry.clean_accuracy = clean.accuracy;
    entry.clean_count = clean_rows.size();
    const auto poison = evaluate_rows(job.net, *job.inputs, job.labels, poison_rows);
    entry.poison_loss = poison.loss;
    entry.poison_accuracy = poison.accuracy;
    entry.poison_count = poison_rows.size();
    check_finite_loss(entry.clean_loss + entry.poison_loss, epoch);
    out.epochs_run = epoch;

    bool stop = false;
    if (stopper) {
      const double val = evaluate_rows(job.net, *job.inputs, job.labels, val_rows).loss;
      entry.validation_loss = val;
      stop = stopper->observe(val);
      if (stopper->last_was_best()) best_net = job.net;
    }
    out.log.push_back(entry);
    if (stop) break;
  }
  if (stopper && stopper->best_epoch() > 0) {
    job.net = std::move(best_net);
    out.best_epoch = stopper->best_epoch();
  }
  return out;
}

inline Network stack(const Network& a, const Network& b) {
  std::vector<DenseLayer> layers = a.layers();
  layers.insert(layers.end(), b.layers().begin(), b.layers().end());
  return Network(std::move(layers));
}

inline Network slice(const Network& net, std::size_t from, std::size_t to) {
  return Network(std::vector<DenseLayer>(net.layers().begin() + static_cast<std::ptrdiff_t>(from),
                                         net.layers().begin() + static_cast<std::ptrdiff_t>(to)));
}

}  // namespace detail

// Trains the classifier head on `train` (optionally fine-tuning the
// encoder). With fine_tune=false the encoder is left untouched and the head
// is fitted on precomputed latent features.
inline TrainResult train_head(ComposedModel model, const Dataset& train,
                              const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw ArgumentError("train_head: empty training set");
  if (train.feature_dim() != model.input_dim()) {
    throw DimensionError("train_head: dataset dim " + std::to_string(train.feature_dim()) +
                         " != model input dim " + std::to_string(model.input_dim()));
  }
  if (model.encoder.latent_dim() != model.head.net.in_dim()) {
    throw DimensionError("train_head: encoder latent dim does not match head");
  }
  if (static_cast<std::size_t>(train.class_count()) > model.class_count()) {
    throw DimensionError("train_head: dataset has more classes than the head");
  }

  TrainResult result;
  if (cfg.epochs == 0) {
    result.model = std::move(model);
    return result;
  }

  detail::FitJob job;
  job.labels = train.labels();
  job.poison_mask = train.poison_mask();
  Tensor2 latent;
  const std::size_t enc_depth = model.encoder.net.depth();
  if (cfg.fine_tune && enc_depth > 0) {
    job.net = detail::stack(model.encoder.net, model.head.net);
    job.encoder_blocks = 2 * enc_depth;
    job.encoder_lr = cfg.fine_tune_lr;
    job.inputs = &train.features();
  } else {
    latent = model.encoder.encode(train.features());
    job.net = model.head.net;
    job.inputs = &latent;
  }

  detail::FitOutcome fit = detail::fit(job, cfg);

  if (job.encoder_blocks > 0) {
    model.encoder.net = detail::slice(job.net, 0, enc_depth);
    model.head.net = detail::slice(job.net, enc_depth, job.net.depth());
  } else {
    model.head.net = std::move(job.net);
  }
  result.model = std::move(model);
  result.log = std::move(fit.log);
  result.epochs_run = fit.epochs_run;
  result.best_epoch = fit.best_epoch;
  result.max_clipped_norm = fit.max_clipped_norm;
  result.dp_steps = fit.dp_steps;
  return result;
}

// Runs head training with early stopping forced on; `result.epochs_run` is
// the stop epoch and the returned parameters are those of `best_epoch`.
inline TrainResult early_stopping_loop(ComposedModel model, const Dataset& train,
                                       TrainConfig cfg) {
  cfg.defense.kind = DefenseKind::early_stop;
  return train_head(std::move(model), train, cfg);
}

// Trains a tanh classifier over widths {in, ..., latent, C} on the shadow
// data, drops the classification layer and returns the frozen remainder.
inline EncoderModel train_encoder_on_shadow(const Dataset& shadow,
                                            std::span<const std::size_t> widths,
                                            const TrainConfig& cfg) {
  cfg.validate();
  if (widths.size() < 2) throw ArgumentError("train_encoder_on_shadow: need >= 2 widths");
  if (widths.front() != shadow.feature_dim()) {
    throw DimensionError("train_encoder_on_shadow: arch input width " +
                         std::to_string(widths.front()) + " != data dim " +
                         std::to_string(shadow.feature_dim()));
  }
  Rng init(derive_seed(cfg.seed, 0));
  std::vector<std::size_t> full(widths.begin(), widths.end());
  full.push_back(static_cast<std::size_t>(shadow.class_count()));
  Network net = Network::build(full, Activation::tanh, Activation::identity, init);

  detail::FitJob job;
  job.net = std::move(net);
  job.labels = shadow.labels();
  job.inputs = &shadow.features();
  TrainConfig plain = cfg;
  plain.defense = DefenseConfig{};
  plain.fine_tune = false;
  detail::fit(job, plain);

  EncoderModel enc;
  enc.net = detail::slice(job.net, 0, job.net.depth() - 1);
  enc.input_dim = widths.front();
  enc.frozen = true;
  enc.provenance = EncoderProvenance::trained_on_shadow;
  return enc;
}

// Fresh composed model: the given encoder plus a newly initialized head.
inline ComposedModel make_model(const EncoderModel& encoder, int classes,
                                const TrainConfig& cfg) {
  Rng init(derive_seed(cfg.seed, 3));
  return {encoder, ClassifierHead::make(encoder.latent_dim(),
                                        static_cast<std::size_t>(classes), init,
                                        cfg.hidden_width)};
}

}  // namespace memx
