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

// memx: command-line driver. Each stage of the pipeline is a subcommand so
// that it can be run and inspected on its own; `experiment` runs the whole
// pipeline from a config file.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 data error,
// 4 numeric error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "memx/memx.hpp"

namespace fs = std::filesystem;

namespace {

using namespace memx;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Loads a labeled dataset. The format follows the extension: .memx1, .csv,
// or an IDX image file (which then needs `labels`).
Dataset load_dataset(const fs::path& path, const fs::path& labels, int classes) {
  const auto ext = path.extension().string();
  if (ext == ".memx1") {
    FeatureTable t = read_memx1(path);
    return Dataset(std::move(t.features), std::move(t.labels), t.class_count);
  }
  if (ext == ".csv") return load_csv(path, classes);
  if (labels.empty()) {
    throw ConfigError(path.string() + ": IDX input needs --labels");
  }
  return load_idx(path, labels, classes);
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    try {
      std::size_t pos = 0;
      const long v = std::stol(item, &pos);
      if (pos != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw ConfigError("bad width '" + item + "' in '" + text + "'");
    }
    start = end + 1;
  }
  return out;
}

// Options shared by the subcommands that train.
struct TrainFlags {
  std::string optimizer = "adam";
  double learning_rate = 1e-3;
  std::size_t batch_size = 100;
  int epochs = 30;
  std::size_t hidden_width = 128;
  bool fine_tune = false;
  double fine_tune_lr = 1e-5;
  std::string defense = "none";
  double l2_penalty = 0.05;
  int patience = 3;
  double val_fraction = 0.1;
  double clip_norm = 1.0;
  double noise_multiplier = 1.0;
  double dp_learning_rate = 0.01;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app, bool with_defenses) {
    app->add_option("--optimizer", optimizer, "adam or sgd")->capture_default_str();
    app->add_option("--lr", learning_rate, "learning rate")->capture_default_str();
    app->add_option("--batch-size", batch_size)->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--hidden-width", hidden_width, "classifier head width")
        ->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    if (!with_defenses) return;
    app->add_flag("--fine-tune", fine_tune, "also update the encoder");
    app->add_option("--fine-tune-lr", fine_tune_lr)->capture_default_str();
    app->add_option("--defense", defense, "none, l2, early_stop or dpsgd")
        ->capture_default_str();
    app->add_option("--l2-penalty", l2_penalty)->capture_default_str();
    app->add_option("--patience", patience)->capture_default_str();
    app->add_option("--val-fraction", val_fraction)->capture_default_str();
    app->add_option("--clip-norm", clip_norm)->capture_default_str();
    app->add_option("--noise-multiplier", noise_multiplier)->capture_default_str();
    app->add_option("--dp-lr", dp_learning_rate)->capture_default_str();
  }

  TrainConfig config() const {
    TrainConfig c;
    if (optimizer == "adam") {
      c.optimizer = OptimizerKind::adam;
    } else if (optimizer == "sgd") {
      c.optimizer = OptimizerKind::sgd;
    } else {
      throw ConfigError("unknown optimizer '" + optimizer + "'");
    }
    c.learning_rate = learning_rate;
    c.batch_size = batch_size;
    c.epochs = epochs;
    c.hidden_width = hidden_width;
    c.fine_tune = fine_tune;
    c.fine_tune_lr = fine_tune_lr;
    c.seed = seed;
    c.defense.kind = parse_defense_kind(defense);
    c.defense.l2_penalty = l2_penalty;
    c.defense.patience = patience;
    c.defense.val_fraction = val_fraction;
    c.defense.clip_norm = clip_norm;
    c.defense.noise_multiplier = noise_multiplier;
    c.defense.dp_learning_rate = dp_learning_rate;
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------------------

struct GenDataCmd {
  GaussianSpec spec;
  std::string out, labels_out, format = "memx1";
  std::size_t rows = 0, cols = 0;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("gen-data", "Generate a Gaussian-cluster dataset");
    c->add_option("--classes", spec.classes)->capture_default_str();
    c->add_option("--dim", spec.dim)->capture_default_str();
    c->add_option("--per-class", spec.per_class)->capture_default_str();
    c->add_option("--spread", spec.spread)->capture_default_str();
    c->add_option("--center-shift", spec.center_shift)->capture_default_str();
    c->add_option("--seed", spec.seed)->capture_default_str();
    c->add_option("--format", format, "memx1, csv or idx")->capture_default_str();
    c->add_option("--out", out, "output file")->required();
    c->add_option("--labels-out", labels_out, "IDX label file");
    c->add_option("--rows", rows, "IDX image rows");
    c->add_option("--cols", cols, "IDX image columns");
    c->callback([this] { run(); });
  }

  void run() const {
    const Dataset d = gen_gaussian(spec);
    if (format == "memx1") {
      write_memx1(d.table(), out);
    } else if (format == "csv") {
      write_csv(d.table(), out);
    } else if (format == "idx") {
      if (labels_out.empty() || rows == 0 || cols == 0) {
        throw ConfigError("gen-data: idx output needs --labels-out, --rows and --cols");
      }
      write_idx(d, rows, cols, out, labels_out);
    } else {
      throw ConfigError("gen-data: unknown format '" + format + "'");
    }
    std::cout << "wrote " << d.size() << " rows to " << out << '\n';
  }
};

struct TrainEncoderCmd {
  std::string shadow, labels, hidden = "128,128", out;
  int classes = 0;
  TrainFlags flags;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("train-encoder", "Train a feature encoder on shadow data");
    c->add_option("--shadow", shadow, "shadow dataset")->required();
    c->add_option("--labels", labels, "IDX labels for --shadow");
    c->add_option("--classes", classes, "class count (0 infers)");
    c->add_option("--hidden", hidden, "comma-separated encoder widths")->capture_default_str();
    c->add_option("--out", out, "model file (encoder only)")->required();
    flags.add_to(c, false);
    c->callback([this] { run(); });
  }

  void run() const {
    const Dataset d = load_dataset(shadow, labels, classes);
    std::vector<std::size_t> widths{d.feature_dim()};
    for (std::size_t w : parse_widths(hidden)) widths.push_back(w);
    if (widths.size() < 2) throw ConfigError("train-encoder: --hidden must not be empty");
    ComposedModel m;
    m.encoder = train_encoder_on_shadow(d, widths, flags.config());
    save_model(m, out);
    std::cout << "encoder " << d.feature_dim() << " -> " << m.encoder.latent_dim()
              << " saved to " << out << '\n';
  }
};

struct PoisonCmd {
  std::string shadow, labels, encoder, out, mode = "dirty";
  int classes = 0;
  PoisonRecipe recipe;
  bool no_balance = false;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("poison", "Craft a poison set for one target class");
    c->add_option("--shadow", shadow, "shadow dataset")->required();
    c->add_option("--labels", labels, "IDX labels for --shadow");
    c->add_option("--classes", classes, "class count (0 infers)");
    c->add_option("--mode", mode, "dirty or clean")->capture_default_str();
    c->add_option("--target", recipe.target_class)->required();
    c->add_option("--budget", recipe.budget)->required();
    c->add_option("--epsilon", recipe.epsilon)->capture_default_str();
    c->add_option("--iterations", recipe.iterations)->capture_default_str();
    c->add_option("--collision-lr", recipe.learning_rate)->capture_default_str();
    c->add_option("--seed", recipe.seed)->capture_default_str();
    c->add_option("--workers", recipe.workers)->capture_default_str();
    c->add_flag("--no-balance", no_balance, "skip class-t filler rows");
    c->add_option("--encoder", encoder, "encoder model (clean mode)");
    c->add_option("--out", out, "output directory")->required();
    c->callback([this] { run(); });
  }

  void run() {
    const Dataset d = load_dataset(shadow, labels, classes);
    recipe.mode = parse_poison_mode(mode);
    recipe.balance_with_normals = !no_balance;
    PoisonSet set;
    if (recipe.mode == PoisonMode::dirty) {
      set = dirty_label_poison(d, recipe);
    } else if (recipe.mode == PoisonMode::clean) {
      if (encoder.empty()) throw ConfigError("poison: clean mode needs --encoder");
      set = clean_label_poison(d, recipe, load_model(encoder).encoder);
    } else {
      throw ConfigError("poison: mode must be dirty or clean");
    }
    export_poison(set, recipe, out);
    std::cout << set.size() << " poison rows written to " << out << '\n';
  }
};

struct TrainCmd {
  std::string clean, labels, poison, encoder, out, log;
  int classes = 0;
  TrainFlags flags;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("train", "Train a classifier head on clean (+ poison) data");
    c->add_option("--clean", clean, "training dataset")->required();
    c->add_option("--labels", labels, "IDX labels for --clean");
    c->add_option("--classes", classes, "class count (0 infers)");
    c->add_option("--poison", poison, "poison.memx1 to append");
    c->add_option("--encoder", encoder, "encoder model (identity when absent)");
    c->add_option("--out", out, "model file")->required();
    c->add_option("--log", log, "per-epoch CSV");
    flags.add_to(c, true);
    c->callback([this] { run(); });
  }

  void run() const {
    Dataset train = load_dataset(clean, labels, classes);
    if (!poison.empty()) {
      FeatureTable t = read_memx1(poison);
      train = concat(train, Dataset(std::move(t.features), std::move(t.labels), t.class_count),
                     true);
    }
    const TrainConfig cfg = flags.config();
    const EncoderModel enc =
        encoder.empty() ? EncoderModel::identity(train.feature_dim()) : load_model(encoder).encoder;
    const TrainResult r = train_head(make_model(enc, train.class_count(), cfg), train, cfg);
    save_model(r.model, out);
    if (!log.empty()) write_text(log, detail::epochs_csv(r.log));
    nlohmann::ordered_json j{{"model", out},
                             {"epochs_run", r.epochs_run},
                             {"train_accuracy", test_accuracy(r.model, train)}};
    if (r.best_epoch > 0) j["best_epoch"] = r.best_epoch;
    std::cout << j.dump(2) << '\n';
  }
};

struct EvalMiCmd {
  std::string model, members, non_members, labels_in, labels_out, out;
  int classes = 0;
  std::optional<int> target;
  std::vector<double> caps{0.01, 0.1};

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("eval-mi", "Score a model with the loss-threshold attack");
    c->add_option("--model", model)->required();
    c->add_option("--members", members, "training (member) dataset")->required();
    c->add_option("--non-members", non_members, "held-out dataset")->required();
    c->add_option("--members-labels", labels_in, "IDX labels for --members");
    c->add_option("--non-members-labels", labels_out, "IDX labels for --non-members");
    c->add_option("--classes", classes, "class count (0 infers)");
    c->add_option("--class", target, "restrict to one class");
    c->add_option("--fpr-caps", caps, "FPR caps for TPR@FPR")->delimiter(',');
    c->add_option("--out", out, "output directory")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    const ComposedModel m = load_model(model);
    const Dataset in = load_dataset(members, labels_in, classes);
    const Dataset held = load_dataset(non_members, labels_out, classes);
    const MIEvaluation ev = target ? per_class_report(m, in, held, *target, caps)
                                   : whole_dataset_report(m, in, held, caps);
    fs::create_directories(out);
    write_text(fs::path(out) / "scores.csv", scores_csv(ev.scores));
    write_text(fs::path(out) / "roc.csv", roc_csv(ev.roc));
    const auto summary = roc_summary(ev.roc, target);
    write_text(fs::path(out) / "summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << '\n';
  }
};

struct HeuristicCmd {
  std::string data, labels, model, out;
  int classes = 0, target = 0;
  std::size_t grid = 50, workers = 1;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("heuristic", "Nearest-neighbor exposure heuristic h");
    c->add_option("--data", data, "dataset whose class rows are measured")->required();
    c->add_option("--labels", labels, "IDX labels for --data");
    c->add_option("--classes", classes, "class count (0 infers)");
    c->add_option("--model", model, "measure in this model's latent space");
    c->add_option("--class", target)->required();
    c->add_option("--grid", grid, "CDF grid points")->capture_default_str();
    c->add_option("--workers", workers)->capture_default_str();
    c->add_option("--out", out, "output directory")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    const Dataset d = load_dataset(data, labels, classes);
    const Tensor2 feats = model.empty() ? d.features() : load_model(model).encoder.encode(d.features());
    const HeuristicReport rep = heuristic_h(feats, d.labels(), target, workers);
    fs::create_directories(out);
    write_text(fs::path(out) / "heuristic.csv", heuristic_csv(rep));
    write_text(fs::path(out) / "cdf.csv", cdf_csv(export_cdf(rep, grid)));
    std::size_t flagged = 0;
    for (const auto& s : rep.samples) flagged += s.degenerate ? 1 : 0;
    std::cout << rep.samples.size() << " rows, " << flagged << " degenerate\n";
  }
};

struct ExperimentCmd {
  std::string config, out, foreign, foreign_labels;
  std::vector<std::string> overrides;
  std::optional<std::size_t> workers;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("experiment", "Run a config-driven end-to-end experiment");
    c->add_option("--config", config, "key = value config file");
    c->add_option("--set", overrides, "override, e.g. --set train.epochs=10");
    c->add_option("--out", out, "output root (else config 'out', else $MEMX_OUT)");
    c->add_option("--workers", workers);
    c->add_option("--foreign-shadow", foreign, "craft poison from this dataset instead");
    c->add_option("--foreign-labels", foreign_labels, "IDX labels for --foreign-shadow");
    c->callback([this] { run(); });
  }

  void run() const {
    ConfigMap m = config.empty() ? ConfigMap{} : ConfigMap::load(config);
    for (const auto& o : overrides) m.apply_override(o);
    ExperimentConfig cfg = experiment_config_from(m);
    if (!out.empty()) {
      cfg.out_root = out;
    } else if (cfg.out_root.empty()) {
      const char* env = std::getenv("MEMX_OUT");
      cfg.out_root = env != nullptr && *env != '\0' ? env : "runs";
    }
    if (workers) cfg.workers = *workers;
    RunReport r = foreign.empty()
                      ? run_experiment(cfg)
                      : ablate_shadow_distribution(
                            cfg, load_dataset(foreign, foreign_labels, cfg.class_count()));
    finalize_run(r);
    std::cout << report_csv(r);
    std::cerr << "artifacts in " << r.run_dir.string() << '\n';
  }
};

struct ReportCmd {
  std::string run_dir, format = "csv";
  bool verify = false;
  int* exit_code = nullptr;

  void add(CLI::App& root, int* code) {
    exit_code = code;
    auto* c = root.add_subcommand("report", "Re-emit or verify a finished run");
    c->add_option("--run", run_dir, "run directory")->required();
    c->add_option("--format", format, "csv or json")->capture_default_str();
    c->add_flag("--verify", verify, "recompute every statistic from the raw score files");
    c->callback([this] { run(); });
  }

  void run() const {
    const RunReport r = load_run_report(run_dir);
    const ReportFormat f = parse_report_format(format);
    if (verify) {
      const auto problems = verify_provenance(r);
      for (const auto& p : problems) std::cerr << "mismatch: " << p << '\n';
      if (!problems.empty()) {
        *exit_code = kExitData;
        return;
      }
      std::cerr << "provenance verified\n";
    }
    std::cout << (f == ReportFormat::csv ? report_csv(r) : report_json(r).dump(2) + "\n");
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memx: poisoning-amplified membership inference lab"};
  app.require_subcommand(1);
  int code = 0;
  GenDataCmd gen;
  TrainEncoderCmd enc;
  PoisonCmd poison;
  TrainCmd train;
  EvalMiCmd eval;
  HeuristicCmd heur;
  ExperimentCmd exp;
  ReportCmd report;
  gen.add(app);
  enc.add(app);
  poison.add(app);
  train.add(app);
  eval.add(app);
  heur.add(app);
  exp.add(app);
  report.add(app, &code);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  } catch (const memx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const memx::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const memx::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return code;
}
