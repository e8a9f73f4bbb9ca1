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
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memx/core/error.hpp"
#include "memx/core/parallel.hpp"
#include "memx/core/rng.hpp"
#include "memx/data/binary_cache.hpp"
#include "memx/data/csv.hpp"
#include "memx/data/gaussian.hpp"
#include "memx/data/idx.hpp"
#include "memx/data/splits.hpp"
#include "memx/diagnostics/heuristic.hpp"
#include "memx/harness/config.hpp"
#include "memx/mi/evaluate.hpp"
#include "memx/mi/export.hpp"
#include "memx/model/trainer.hpp"
#include "memx/poison/export.hpp"
#include "memx/poison/poison.hpp"

namespace memx {

// Noise level of the default experiment fixture. The generator's own
// default (0.08) leaves the classes perfectly separable, which gives the
// head nothing to overfit; 0.2 keeps test accuracy near 95%.
inline constexpr double kFixtureSpread = 0.2;

struct DataSpec {
  std::string source = "gaussian";  // gaussian | idx | csv | memx1
  GaussianSpec gaussian{10, 32, 600, kFixtureSpread, 0, 0.0};
  std::filesystem::path path;         // csv / memx1 file, or IDX images
  std::filesystem::path labels_path;  // IDX labels
  int classes = 10;
};

struct EvalSpec {
  std::vector<int> classes{0};
  std::vector<double> fpr_caps{kDefaultFprCap};
  bool shadow_attack = false;
  int n_shadows = 16;
  bool heuristics = true;
  std::size_t cdf_grid = 50;
};

struct ExperimentConfig {
  std::string run_id = "run";
  DataSpec data;
  std::array<std::size_t, 3> split_sizes{2000, 2000, 2000};
  // Encoder layer widths after the input; empty means the identity map.
  std::vector<std::size_t> encoder_hidden{128, 128};
  EncoderProvenance encoder = EncoderProvenance::trained_on_shadow;
  TrainConfig train;
  PoisonMode mode = PoisonMode::dirty;
  double budget_fraction = 0.10;  // of |clean|; ignored when budget > 0
  std::size_t budget = 0;
  double epsilon = 16.0 / 255.0;
  int collision_iterations = 1000;
  double collision_lr = 0.01;
  bool balance_with_normals = true;
  EvalSpec eval;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path out_root;  // empty: keep results in memory only
  std::size_t workers = 1;

  int class_count() const {
    return data.source == "gaussian" ? data.gaussian.classes : data.classes;
  }

  std::size_t poison_budget() const {
    if (budget > 0) return budget;
    const double b = budget_fraction * static_cast<double>(split_sizes[0]);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(b)));
  }

  void validate() const {
    if (seeds.empty()) throw ConfigError("experiment: seeds must be nonempty");
    if (eval.classes.empty()) throw ConfigError("experiment: eval.classes must be nonempty");
    const int c = class_count();
    if (c < 2) throw ConfigError("experiment: need >= 2 classes");
    for (int t : eval.classes) {
      if (t < 0 || t >= c) {
        throw ConfigError("experiment: class " + std::to_string(t) + " outside [0, " +
                          std::to_string(c) + ")");
      }
    }
    for (double cap : eval.fpr_caps) {
      if (!(cap > 0.0 && cap < 1.0)) throw ConfigError("experiment: fpr caps must lie in (0, 1)");
    }
    if (eval.shadow_attack && eval.n_shadows < 2) {
      throw ConfigError("experiment: eval.n_shadows must be >= 2");
    }
    if (eval.cdf_grid < 1) throw ConfigError("experiment: eval.cdf_grid must be >= 1");
    if (!(budget_fraction > 0.0) && budget == 0) {
      throw ConfigError("experiment: poison budget must be positive");
    }
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("experiment: epsilon must lie in (0, 1]");
    if (collision_iterations < 0) throw ConfigError("experiment: collision iterations must be >= 0");
    if (data.source != "gaussian" && data.source != "idx" && data.source != "csv" &&
        data.source != "memx1") {
      throw ConfigError("experiment: unknown data source '" + data.source + "'");
    }
    if (run_id.empty() || run_id.find('/') != std::string::npos) {
      throw ConfigError("experiment: run_id must be a nonempty path component");
    }
    if (workers < 1) throw ConfigError("experiment: workers must be >= 1");
    train.validate();
  }
};

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["run_id"] = c.run_id;
  j["data"] = {{"source", c.data.source},
               {"classes", c.class_count()},
               {"dim", c.data.gaussian.dim},
               {"per_class", c.data.gaussian.per_class},
               {"spread", c.data.gaussian.spread},
               {"center_shift", c.data.gaussian.center_shift},
               {"path", c.data.path.string()},
               {"labels_path", c.data.labels_path.string()}};
  j["splits"] = c.split_sizes;
  j["encoder"] = {{"hidden", c.encoder_hidden}, {"provenance", to_string(c.encoder)}};
  const auto& t = c.train;
  j["train"] = {{"optimizer", t.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
                {"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"fine_tune", t.fine_tune},
                {"fine_tune_lr", t.fine_tune_lr},
                {"hidden_width", t.hidden_width}};
  const auto& d = t.defense;
  j["defense"] = {{"kind", to_string(d.kind)},
                  {"l2_penalty", d.l2_penalty},
                  {"patience", d.patience},
                  {"val_fraction", d.val_fraction},
                  {"clip_norm", d.clip_norm},
                  {"noise_multiplier", d.noise_multiplier},
                  {"microbatch_size", d.microbatch_size},
                  {"dp_learning_rate", d.dp_learning_rate}};
  j["poison"] = {{"mode", to_string(c.mode)},
                 {"budget", c.poison_budget()},
                 {"epsilon", c.epsilon},
                 {"iterations", c.collision_iterations},
                 {"learning_rate", c.collision_lr},
                 {"balance_with_normals", c.balance_with_normals}};
  j["eval"] = {{"classes", c.eval.classes},
               {"fpr_caps", c.eval.fpr_caps},
               {"shadow_attack", c.eval.shadow_attack},
               {"n_shadows", c.eval.n_shadows},
               {"heuristics", c.eval.heuristics},
               {"cdf_grid", c.eval.cdf_grid}};
  j["seeds"] = c.seeds;
  return j;
}

// Reads an ExperimentConfig from a ConfigMap; absent keys keep defaults.
// Unknown keys are rejected so that typos cannot silently change a run.
inline ExperimentConfig experiment_config_from(const ConfigMap& m) {
  ExperimentConfig c;
  auto size = [&](const std::string& key, std::size_t fallback) {
    const auto v = m.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError("config key '" + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
  };
  c.run_id = m.get_string("run_id", c.run_id);
  c.data.source = m.get_string("data.source", c.data.source);
  c.data.classes = static_cast<int>(m.get_int("data.classes", c.data.classes));
  c.data.gaussian.classes = static_cast<int>(m.get_int("data.classes", c.data.gaussian.classes));
  c.data.gaussian.dim = size("data.dim", c.data.gaussian.dim);
  c.data.gaussian.per_class = size("data.per_class", c.data.gaussian.per_class);
  c.data.gaussian.spread = m.get_double("data.spread", c.data.gaussian.spread);
  c.data.gaussian.center_shift = m.get_double("data.center_shift", c.data.gaussian.center_shift);
  c.data.path = m.get_string("data.path", "");
  c.data.labels_path = m.get_string("data.labels_path", "");
  c.split_sizes[0] = size("splits.clean", c.split_sizes[0]);
  c.split_sizes[1] = size("splits.test", c.split_sizes[1]);
  c.split_sizes[2] = size("splits.shadow", c.split_sizes[2]);

  std::vector<std::int64_t> hidden_default(c.encoder_hidden.begin(), c.encoder_hidden.end());
  c.encoder_hidden.clear();
  for (auto w : m.get_int_list("encoder.hidden", hidden_default)) {
    if (w < 1) throw ConfigError("encoder.hidden widths must be >= 1");
    c.encoder_hidden.push_back(static_cast<std::size_t>(w));
  }
  const std::string prov = m.get_string("encoder.provenance", "shadow");
  if (prov == "shadow") {
    c.encoder = EncoderProvenance::trained_on_shadow;
  } else if (prov == "random") {
    c.encoder = EncoderProvenance::seeded_random;
  } else {
    throw ConfigError("encoder.provenance must be 'shadow' or 'random'");
  }

  auto& t = c.train;
  const std::string opt = m.get_string("train.optimizer", "adam");
  if (opt == "adam") {
    t.optimizer = OptimizerKind::adam;
  } else if (opt == "sgd") {
    t.optimizer = OptimizerKind::sgd;
  } else {
    throw ConfigError("train.optimizer must be 'adam' or 'sgd'");
  }
  t.learning_rate = m.get_double("train.learning_rate", t.learning_rate);
  t.batch_size = size("train.batch_size", t.batch_size);
  t.epochs = static_cast<int>(m.get_int("train.epochs", t.epochs));
  t.fine_tune = m.get_bool("train.fine_tune", t.fine_tune);
  t.fine_tune_lr = m.get_double("train.fine_tune_lr", t.fine_tune_lr);
  t.hidden_width = size("train.hidden_width", t.hidden_width);

  auto& d = t.defense;
  d.kind = parse_defense_kind(m.get_string("defense.kind", to_string(d.kind)));
  d.l2_penalty = m.get_double("defense.l2_penalty", d.l2_penalty);
  d.patience = static_cast<int>(m.get_int("defense.patience", d.patience));
  d.val_fraction = m.get_double("defense.val_fraction", d.val_fraction);
  d.clip_norm = m.get_double("defense.clip_norm", d.clip_norm);
  d.noise_multiplier = m.get_double("defense.noise_multiplier", d.noise_multiplier);
  d.microbatch_size = size("defense.microbatch_size", d.microbatch_size);
  d.dp_learning_rate = m.get_double("defense.dp_learning_rate", d.dp_learning_rate);

  c.mode = parse_poison_mode(m.get_string("poison.mode", to_string(c.mode)));
  c.budget_fraction = m.get_double("poison.budget_fraction", c.budget_fraction);
  c.budget = size("poison.budget", c.budget);
  c.epsilon = m.get_double("poison.epsilon", c.epsilon);
  c.collision_iterations =
      static_cast<int>(m.get_int("poison.iterations", c.collision_iterations));
  c.collision_lr = m.get_double("poison.learning_rate", c.collision_lr);
  c.balance_with_normals = m.get_bool("poison.balance_with_normals", c.balance_with_normals);

  c.eval.classes.clear();
  for (auto v : m.get_int_list("eval.classes", {0})) c.eval.classes.push_back(static_cast<int>(v));
  c.eval.fpr_caps = m.get_double_list("eval.fpr_caps", c.eval.fpr_caps);
  c.eval.shadow_attack = m.get_bool("eval.shadow_attack", c.eval.shadow_attack);
  c.eval.n_shadows = static_cast<int>(m.get_int("eval.n_shadows", c.eval.n_shadows));
  c.eval.heuristics = m.get_bool("eval.heuristics", c.eval.heuristics);
  c.eval.cdf_grid = size("eval.cdf_grid", c.eval.cdf_grid);

  c.seeds.clear();
  for (auto s : m.get_int_list("seeds", {1})) {
    if (s < 0) throw ConfigError("seeds must be >= 0");
    c.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  c.out_root = m.get_string("out", "");
  c.workers = size("workers", c.workers);

  const auto unused = m.unused_keys();
  if (!unused.empty()) throw ConfigError("unknown config key '" + unused.front() + "'");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Results.

struct PoisonedMetrics {
  double auc = 0.0;
  std::map<double, double> tpr_at_fpr;
  double test_accuracy = 0.0;
  std::size_t poison_size = 0;
  double poison_train_accuracy = 0.0;  // final model on the poison rows
  double clean_train_accuracy = 0.0;   // final model on the clean rows
  int epochs_run = 0;
  std::string scores_file;
  std::string predictions_file;
};

struct HeuristicSummary {
  double clean_median = 0.0;
  std::optional<double> poisoned_median;
  std::optional<KsResult> shift;  // H1: poisoned h stochastically smaller
};

struct ShadowSummary {
  double clean_auc = 0.0;
  std::optional<double> poisoned_auc;
  std::size_t excluded = 0;
};

struct ClassResult {
  std::uint64_t seed = 0;
  int target_class = 0;
  double clean_auc = 0.0;
  std::map<double, double> clean_tpr_at_fpr;
  double clean_test_accuracy = 0.0;
  std::string clean_scores_file;
  std::string clean_predictions_file;
  std::optional<PoisonedMetrics> poisoned;
  std::optional<HeuristicSummary> heuristic;
  std::optional<ShadowSummary> shadow;
};

struct ArtifactEntry {
  std::string path;  // relative to the run directory
  std::uintmax_t bytes = 0;
  std::uint64_t fnv1a = 0;
};

struct RunReport {
  ExperimentConfig config;
  std::string kind = "experiment";  // or "shadow-ablation"
  std::vector<ClassResult> results;  // seed-major, then eval.classes order
  std::vector<ArtifactEntry> artifacts;
  std::filesystem::path run_dir;  // empty when nothing was written
};

// ---------------------------------------------------------------------------

namespace detail {

// Re-throws the active memx error with `context` prepended, keeping its type
// so that exit-code mapping still works.
[[noreturn]] inline void rethrow_in_context(const std::string& context) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(context + ": " + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError(context + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(context + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(context + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(context + ": " + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError(context + ": " + e.what());
  } catch (const StateError& e) {
    throw StateError(context + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError(context + ": " + e.what());
  } catch (const Error& e) {
    throw Error(context + ": " + e.what());
  }
}

template <typename Fn>
auto stage(const std::string& context, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error&) {
    rethrow_in_context(context);
  }
}

inline Dataset load_source(const ExperimentConfig& c, std::uint64_t seed) {
  const auto& d = c.data;
  if (d.source == "gaussian") {
    GaussianSpec g = d.gaussian;
    g.seed = derive_seed(seed, 10);
    return gen_gaussian(g);
  }
  if (d.source == "idx") return load_idx(d.path, d.labels_path, d.classes);
  if (d.source == "csv") return load_csv(d.path, d.classes);
  FeatureTable t = read_memx1(d.path);
  return Dataset(std::move(t.features), std::move(t.labels), t.class_count);
}

inline EncoderModel build_encoder(const ExperimentConfig& c, const Dataset& shadow,
                                  std::uint64_t seed) {
  const std::size_t d = shadow.feature_dim();
  if (c.encoder_hidden.empty()) return EncoderModel::identity(d);
  std::vector<std::size_t> widths{d};
  widths.insert(widths.end(), c.encoder_hidden.begin(), c.encoder_hidden.end());
  TrainConfig tc = c.train;
  tc.seed = derive_seed(seed, 12);
  if (c.encoder == EncoderProvenance::trained_on_shadow) {
    return train_encoder_on_shadow(shadow, widths, tc);
  }
  Rng rng(tc.seed);
  return EncoderModel::random(widths, rng);
}

inline std::string epochs_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,clean_loss,clean_accuracy,clean_count,poison_loss,poison_accuracy,"
         "poison_count,validation_loss\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.clean_loss) << ','
        << format_double(e.clean_accuracy) << ',' << e.clean_count << ','
        << format_double(e.poison_loss) << ',' << format_double(e.poison_accuracy) << ','
        << e.poison_count << ','
        << (e.validation_loss ? format_double(*e.validation_loss) : std::string()) << '\n';
  }
  return out.str();
}

// Header `id,label,predicted`.
inline std::string predictions_csv(const ComposedModel& model, const Dataset& test) {
  const Tensor2 p = predict(model, test.features());
  std::ostringstream out;
  out << "id,label,predicted\n";
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto row = p.row(i);
    out << i << ',' << test.labels()[i] << ','
        << (std::max_element(row.begin(), row.end()) - row.begin()) << '\n';
  }
  return out.str();
}

inline double subset_accuracy(const ComposedModel& model, const Dataset& data, bool poison) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.is_poison(i) == poison) rows.push_back(i);
  }
  if (rows.empty()) return 0.0;
  return test_accuracy(model, data.subset(rows));
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Per-seed state shared by that seed's class jobs (read-only once built).
struct SeedState {
  Splits splits;
  EncoderModel encoder;
  ComposedModel clean_model;
  std::vector<EpochLog> clean_log;
  double clean_accuracy = 0.0;
};

class ArtifactSink {
 public:
  explicit ArtifactSink(std::filesystem::path dir) : dir_(std::move(dir)) {}
  bool enabled() const { return !dir_.empty(); }
  const std::filesystem::path& dir() const { return dir_; }

  // Writes `text` at `rel` (when enabled) and returns `rel`.
  std::string put(const std::string& rel, const std::string& text) const {
    if (enabled()) write_text(dir_ / rel, text);
    return rel;
  }

 private:
  std::filesystem::path dir_;
};

inline std::uint64_t fnv1a_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

inline std::vector<ArtifactEntry> scan_artifacts(const std::filesystem::path& dir) {
  std::vector<ArtifactEntry> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    out.push_back({rel, e.file_size(), fnv1a_file(e.path())});
  }
  std::sort(out.begin(), out.end(),
            [](const ArtifactEntry& a, const ArtifactEntry& b) { return a.path < b.path; });
  return out;
}

inline RunReport run_impl(const ExperimentConfig& cfg, const Dataset* foreign_shadow) {
  cfg.validate();
  RunReport report;
  report.config = cfg;
  if (foreign_shadow != nullptr) report.kind = "shadow-ablation";
  std::filesystem::path run_dir;
  if (!cfg.out_root.empty()) {
    run_dir = cfg.out_root / cfg.run_id;
    std::filesystem::create_directories(run_dir);
  }
  const ArtifactSink sink(run_dir);
  sink.put("config.json", to_json(cfg).dump(2) + "\n");

  const std::vector<double> caps = cfg.eval.fpr_caps;
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_classes = cfg.eval.classes.size();
  const std::size_t outer = std::min(cfg.workers, n_seeds * n_classes);
  const std::size_t inner = std::max<std::size_t>(1, cfg.workers / std::max<std::size_t>(1, outer));

  // Stage 1: data, encoder and clean model per seed.
  std::vector<SeedState> states(n_seeds);
  parallel_for(n_seeds, std::min(cfg.workers, n_seeds), [&](std::size_t si) {
    const std::uint64_t seed = cfg.seeds[si];
    const std::string ctx = "seed " + std::to_string(seed);
    SeedState& st = states[si];
    const Dataset source = stage(ctx + ", stage data", [&] { return load_source(cfg, seed); });
    st.splits = stage(ctx + ", stage splits", [&] {
      SplitSpec ss;
      ss.sizes = cfg.split_sizes;
      ss.seed = derive_seed(seed, 11);
      return make_splits(source, ss);
    });
    if (foreign_shadow != nullptr) {
      if (foreign_shadow->class_count() != source.class_count()) {
        throw ArgumentError(ctx + ": foreign shadow has " +
                            std::to_string(foreign_shadow->class_count()) +
                            " classes, target data has " + std::to_string(source.class_count()));
      }
      if (foreign_shadow->feature_dim() != source.feature_dim()) {
        throw DimensionError(ctx + ": foreign shadow feature dim differs from target data");
      }
    }
    st.encoder = stage(ctx + ", stage encoder",
                       [&] { return build_encoder(cfg, st.splits.shadow, seed); });
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, 13);
    auto trained = stage(ctx + ", stage train-clean", [&] {
      return train_head(make_model(st.encoder, source.class_count(), tc), st.splits.clean, tc);
    });
    st.clean_model = std::move(trained.model);
    st.clean_log = std::move(trained.log);
    st.clean_accuracy = test_accuracy(st.clean_model, st.splits.test);
    const std::string base = "seed-" + std::to_string(seed) + "/clean/";
    sink.put(base + "epochs.csv", epochs_csv(st.clean_log));
    sink.put(base + "test_predictions.csv", predictions_csv(st.clean_model, st.splits.test));
  });

  // Stage 2: one job per (seed, target class).
  report.results.resize(n_seeds * n_classes);
  parallel_for(n_seeds * n_classes, outer, [&](std::size_t job) {
    const std::size_t si = job / n_classes;
    const int t = cfg.eval.classes[job % n_classes];
    const std::uint64_t seed = cfg.seeds[si];
    const std::string ctx = "seed " + std::to_string(seed) + ", class " + std::to_string(t);
    const SeedState& st = states[si];
    const Dataset& clean = st.splits.clean;
    const Dataset& test = st.splits.test;
    const std::string seed_dir = "seed-" + std::to_string(seed) + "/";
    const std::string class_dir = seed_dir + "class-" + std::to_string(t) + "/";

    ClassResult r;
    r.seed = seed;
    r.target_class = t;
    const MIEvaluation clean_mi =
        stage(ctx + ", stage eval-clean", [&] { return per_class_report(st.clean_model, clean, test, t, caps); });
    r.clean_auc = clean_mi.roc.auc;
    r.clean_tpr_at_fpr = clean_mi.roc.tpr_at_fpr;
    r.clean_test_accuracy = st.clean_accuracy;
    r.clean_scores_file =
        sink.put(seed_dir + "clean/scores_class" + std::to_string(t) + ".csv", scores_csv(clean_mi.scores));
    sink.put(seed_dir + "clean/roc_class" + std::to_string(t) + ".csv", roc_csv(clean_mi.roc));
    sink.put(seed_dir + "clean/summary_class" + std::to_string(t) + ".json",
             roc_summary(clean_mi.roc, t).dump(2) + "\n");
    r.clean_predictions_file = seed_dir + "clean/test_predictions.csv";

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, 13);
    const int classes = clean.class_count();

    std::optional<PoisonSet> poison;
    std::optional<ComposedModel> poisoned_model;
    Dataset train_poisoned;
    if (cfg.mode != PoisonMode::none) {
      PoisonRecipe recipe;
      recipe.target_class = t;
      recipe.budget = cfg.poison_budget();
      recipe.mode = cfg.mode;
      recipe.epsilon = cfg.epsilon;
      recipe.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(t));
      recipe.balance_with_normals = cfg.balance_with_normals;
      recipe.iterations = cfg.collision_iterations;
      recipe.learning_rate = cfg.collision_lr;
      recipe.workers = inner;
      const Dataset& attacker_data = foreign_shadow != nullptr ? *foreign_shadow : st.splits.shadow;
      poison = stage(ctx + ", stage poison", [&] {
        return cfg.mode == PoisonMode::dirty
                   ? dirty_label_poison(attacker_data, recipe)
                   : clean_label_poison(attacker_data, recipe, st.encoder);
      });
      if (sink.enabled()) {
        stage(ctx + ", stage export-poison", [&] {
          export_poison(*poison, recipe, sink.dir() / (class_dir + "poison"));
          return 0;
        });
      }
      train_poisoned = concat(clean, poison->examples, /*b_is_poison=*/true);
      auto trained = stage(ctx + ", stage train-poisoned", [&] {
        return train_head(make_model(st.encoder, classes, tc), train_poisoned, tc);
      });
      poisoned_model = std::move(trained.model);
      const MIEvaluation mi = stage(ctx + ", stage eval-poisoned", [&] {
        return per_class_report(*poisoned_model, clean, test, t, caps);
      });
      PoisonedMetrics pm;
      pm.auc = mi.roc.auc;
      pm.tpr_at_fpr = mi.roc.tpr_at_fpr;
      pm.test_accuracy = test_accuracy(*poisoned_model, test);
      pm.poison_size = poison->size();
      pm.poison_train_accuracy = subset_accuracy(*poisoned_model, train_poisoned, true);
      pm.clean_train_accuracy = subset_accuracy(*poisoned_model, train_poisoned, false);
      pm.epochs_run = trained.epochs_run;
      pm.scores_file = sink.put(class_dir + "scores.csv", scores_csv(mi.scores));
      pm.predictions_file =
          sink.put(class_dir + "test_predictions.csv", predictions_csv(*poisoned_model, test));
      sink.put(class_dir + "roc.csv", roc_csv(mi.roc));
      sink.put(class_dir + "summary.json", roc_summary(mi.roc, t).dump(2) + "\n");
      sink.put(class_dir + "epochs.csv", epochs_csv(trained.log));
      r.poisoned = pm;
    }

    if (cfg.eval.heuristics) {
      stage(ctx + ", stage heuristic", [&] {
        HeuristicSummary hs;
        const Tensor2 z_clean = st.clean_model.encoder.encode(clean.features());
        const auto h_clean = heuristic_h(z_clean, clean.labels(), t);
        hs.clean_median = median(h_clean.finite_h());
        sink.put(class_dir + "heuristic_clean.csv", heuristic_csv(h_clean));
        sink.put(class_dir + "cdf_clean.csv", cdf_csv(export_cdf(h_clean, cfg.eval.cdf_grid)));
        if (poisoned_model) {
          const Tensor2 z = poisoned_model->encoder.encode(train_poisoned.features());
          const auto h_p = heuristic_h(z, train_poisoned.labels(), t);
          hs.poisoned_median = median(h_p.finite_h());
          hs.shift = ks_one_sided_less(h_p.finite_h(), h_clean.finite_h());
          sink.put(class_dir + "heuristic_poisoned.csv", heuristic_csv(h_p));
          sink.put(class_dir + "cdf_poisoned.csv", cdf_csv(export_cdf(h_p, cfg.eval.cdf_grid)));
        }
        r.heuristic = hs;
        return 0;
      });
    }

    if (cfg.eval.shadow_attack) {
      stage(ctx + ", stage shadow-attack", [&] {
        const Dataset pool = concat(clean, test);
        std::vector<std::uint8_t> membership(pool.size(), 0);
        std::fill(membership.begin(), membership.begin() + static_cast<std::ptrdiff_t>(clean.size()), 1);
        const ModelFactory factory = [&](const Dataset& train, std::uint64_t s) {
          TrainConfig sc = cfg.train;
          sc.seed = s;
          return train_head(make_model(st.encoder, classes, sc), train, sc).model;
        };
        ShadowAttackConfig sa;
        sa.n_shadows = cfg.eval.n_shadows;
        sa.seed = derive_seed(seed, 2000 + static_cast<std::uint64_t>(t));
        sa.workers = inner;
        sa.eval_class = t;
        ShadowSummary ss;
        const auto clean_attack = shadow_model_attack(pool, membership, st.clean_model, factory, sa, caps);
        ss.clean_auc = clean_attack.roc.auc;
        ss.excluded = clean_attack.excluded;
        sink.put(class_dir + "shadow_clean_scores.csv", scores_csv(clean_attack.scores));
        if (poisoned_model) {
          sa.extra_train = &poison->examples;
          const auto p_attack =
              shadow_model_attack(pool, membership, *poisoned_model, factory, sa, caps);
          ss.poisoned_auc = p_attack.roc.auc;
          sink.put(class_dir + "shadow_poisoned_scores.csv", scores_csv(p_attack.scores));
        }
        r.shadow = ss;
        return 0;
      });
    }
    report.results[job] = std::move(r);
  });

  report.run_dir = run_dir;
  return report;
}

}  // namespace detail

// Seeds x target classes: splits, encoder, clean and poisoned training, MI
// evaluation, test accuracy and heuristics. With cfg.out_root set, raw
// artifacts land under <out_root>/<run_id>/; emit_report() adds the
// summaries and the manifest.
inline RunReport run_experiment(const ExperimentConfig& cfg) {
  return detail::run_impl(cfg, nullptr);
}

// Same pipeline, but the attacker crafts poison from `foreign_shadow`
// instead of the in-distribution shadow split. The victim's encoder is
// unchanged. Deltas against the clean baseline are in the report.
inline RunReport ablate_shadow_distribution(const ExperimentConfig& cfg,
                                            const Dataset& foreign_shadow) {
  if (cfg.mode == PoisonMode::none) {
    throw ConfigError("ablate_shadow_distribution: poison mode must not be none");
  }
  for (int t : cfg.eval.classes) {
    if (t >= foreign_shadow.class_count() || foreign_shadow.class_indices(t).empty()) {
      throw ArgumentError("ablate_shadow_distribution: foreign shadow has no samples of class " +
                          std::to_string(t));
    }
  }
  return detail::run_impl(cfg, &foreign_shadow);
}

}  // namespace memx
