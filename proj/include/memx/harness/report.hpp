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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memx/core/error.hpp"
#include "memx/harness/experiment.hpp"
#include "memx/mi/export.hpp"
#include "memx/mi/roc.hpp"

namespace memx {

struct MeanStd {
  double mean = 0.0;
  std::optional<double> std;  // sample std; only with >= 2 values
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  m.n = v.size();
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double q = 0.0;
    for (double x : v) q += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(q / static_cast<double>(v.size() - 1));
  }
  return m;
}

// Three decimals without the leading zero: 0.697 -> ".697", -0.05 -> "-.050".
inline std::string format_fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s.rfind("0.", 0) == 0) return s.substr(1);
  if (s.rfind("-0.", 0) == 0) {
    if (s == "-0.000") return ".000";
    return "-" + s.substr(2);
  }
  return s;
}

inline std::string format_fraction(const MeanStd& m) {
  std::string s = format_fraction(m.mean);
  if (m.std) s += "±" + format_fraction(*m.std);
  return s;
}

// Percent with two decimals: 0.0412 -> "4.12%", with std "4.12±1.49%".
inline std::string format_percent(const MeanStd& m) {
  char buf[64];
  if (m.std) {
    std::snprintf(buf, sizeof buf, "%.2f±%.2f%%", 100.0 * m.mean, 100.0 * *m.std);
  } else {
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * m.mean);
  }
  return buf;
}

// Seed-aggregated metrics for one target class.
struct ClassSummary {
  int target_class = 0;
  MeanStd clean_auc;
  std::optional<MeanStd> poisoned_auc;
  std::optional<MeanStd> delta_auc;
  std::map<double, MeanStd> clean_tpr;
  std::map<double, MeanStd> poisoned_tpr;
  MeanStd clean_accuracy;
  std::optional<MeanStd> poisoned_accuracy;
  std::optional<MeanStd> shadow_clean_auc;
  std::optional<MeanStd> shadow_poisoned_auc;
};

inline std::vector<ClassSummary> summarize(const RunReport& report) {
  std::vector<ClassSummary> out;
  for (int t : report.config.eval.classes) {
    std::vector<double> ca, pa, da, cacc, pacc, sc, sp;
    std::map<double, std::vector<double>> ct, pt;
    for (const auto& r : report.results) {
      if (r.target_class != t) continue;
      ca.push_back(r.clean_auc);
      cacc.push_back(r.clean_test_accuracy);
      for (const auto& [cap, v] : r.clean_tpr_at_fpr) ct[cap].push_back(v);
      if (r.poisoned) {
        pa.push_back(r.poisoned->auc);
        da.push_back(r.poisoned->auc - r.clean_auc);
        pacc.push_back(r.poisoned->test_accuracy);
        for (const auto& [cap, v] : r.poisoned->tpr_at_fpr) pt[cap].push_back(v);
      }
      if (r.shadow) {
        sc.push_back(r.shadow->clean_auc);
        if (r.shadow->poisoned_auc) sp.push_back(*r.shadow->poisoned_auc);
      }
    }
    ClassSummary s;
    s.target_class = t;
    s.clean_auc = mean_std(ca);
    s.clean_accuracy = mean_std(cacc);
    for (const auto& [cap, v] : ct) s.clean_tpr[cap] = mean_std(v);
    if (!pa.empty()) {
      s.poisoned_auc = mean_std(pa);
      s.delta_auc = mean_std(da);
      s.poisoned_accuracy = mean_std(pacc);
      for (const auto& [cap, v] : pt) s.poisoned_tpr[cap] = mean_std(v);
    }
    if (!sc.empty()) s.shadow_clean_auc = mean_std(sc);
    if (!sp.empty()) s.shadow_poisoned_auc = mean_std(sp);
    out.push_back(s);
  }
  return out;
}

inline std::string cap_label(double cap) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", 100.0 * cap);
  return std::string("tpr@") + buf + "%";
}

// Table-1 style CSV: one row per target class, formatted mean±std cells.
inline std::string report_csv(const RunReport& report) {
  const auto rows = summarize(report);
  const auto& caps = report.config.eval.fpr_caps;
  std::ostringstream out;
  out << "class,seeds,clean_auc,poisoned_auc,delta_auc";
  for (double cap : caps) out << ",clean_" << cap_label(cap) << ",poisoned_" << cap_label(cap);
  out << ",clean_accuracy,poisoned_accuracy\n";
  for (const auto& s : rows) {
    out << s.target_class << ',' << s.clean_auc.n << ',' << format_fraction(s.clean_auc) << ','
        << (s.poisoned_auc ? format_fraction(*s.poisoned_auc) : "") << ','
        << (s.delta_auc ? format_fraction(*s.delta_auc) : "");
    for (double cap : caps) {
      out << ',' << format_percent(s.clean_tpr.at(cap)) << ',';
      if (s.poisoned_tpr.count(cap)) out << format_percent(s.poisoned_tpr.at(cap));
    }
    out << ',' << format_fraction(s.clean_accuracy) << ','
        << (s.poisoned_accuracy ? format_fraction(*s.poisoned_accuracy) : "") << '\n';
  }
  return out.str();
}

inline nlohmann::ordered_json mean_std_json(const MeanStd& m) {
  nlohmann::ordered_json j;
  j["mean"] = m.mean;
  if (m.std) j["std"] = *m.std;
  j["n"] = m.n;
  return j;
}

inline nlohmann::ordered_json caps_json(const std::map<double, double>& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [cap, v] : m) j[detail::format_double(cap)] = v;
  return j;
}

inline nlohmann::ordered_json report_json(const RunReport& report) {
  nlohmann::ordered_json j;
  j["kind"] = report.kind;
  j["config"] = to_json(report.config);
  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  for (const auto& r : report.results) {
    nlohmann::ordered_json e;
    e["seed"] = r.seed;
    e["class"] = r.target_class;
    e["clean"] = {{"auc", r.clean_auc},
                  {"tpr_at_fpr", caps_json(r.clean_tpr_at_fpr)},
                  {"test_accuracy", r.clean_test_accuracy},
                  {"scores_file", r.clean_scores_file},
                  {"predictions_file", r.clean_predictions_file}};
    if (r.poisoned) {
      const auto& p = *r.poisoned;
      e["poisoned"] = {{"auc", p.auc},
                       {"tpr_at_fpr", caps_json(p.tpr_at_fpr)},
                       {"test_accuracy", p.test_accuracy},
                       {"poison_size", p.poison_size},
                       {"poison_train_accuracy", p.poison_train_accuracy},
                       {"clean_train_accuracy", p.clean_train_accuracy},
                       {"epochs_run", p.epochs_run},
                       {"scores_file", p.scores_file},
                       {"predictions_file", p.predictions_file}};
      e["delta_auc"] = p.auc - r.clean_auc;
    }
    if (r.heuristic) {
      nlohmann::ordered_json h;
      h["clean_median"] = r.heuristic->clean_median;
      if (r.heuristic->poisoned_median) h["poisoned_median"] = *r.heuristic->poisoned_median;
      if (r.heuristic->shift) {
        h["ks_statistic"] = r.heuristic->shift->statistic;
        h["ks_p_value"] = r.heuristic->shift->p_value;
      }
      e["heuristic"] = h;
    }
    if (r.shadow) {
      nlohmann::ordered_json s;
      s["clean_auc"] = r.shadow->clean_auc;
      if (r.shadow->poisoned_auc) s["poisoned_auc"] = *r.shadow->poisoned_auc;
      s["excluded"] = r.shadow->excluded;
      e["shadow_attack"] = s;
    }
    results.push_back(e);
  }
  j["results"] = results;

  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (const auto& s : summarize(report)) {
    nlohmann::ordered_json e;
    e["class"] = s.target_class;
    e["clean_auc"] = mean_std_json(s.clean_auc);
    e["clean_auc_text"] = format_fraction(s.clean_auc);
    if (s.poisoned_auc) {
      e["poisoned_auc"] = mean_std_json(*s.poisoned_auc);
      e["poisoned_auc_text"] = format_fraction(*s.poisoned_auc);
      e["delta_auc"] = mean_std_json(*s.delta_auc);
      e["delta_auc_text"] = format_fraction(*s.delta_auc);
    }
    nlohmann::ordered_json tprs = nlohmann::ordered_json::object();
    for (const auto& [cap, m] : s.clean_tpr) {
      nlohmann::ordered_json c;
      c["clean"] = format_percent(m);
      if (s.poisoned_tpr.count(cap)) c["poisoned"] = format_percent(s.poisoned_tpr.at(cap));
      tprs[detail::format_double(cap)] = c;
    }
    e["tpr_at_fpr_text"] = tprs;
    e["clean_accuracy_text"] = format_fraction(s.clean_accuracy);
    if (s.poisoned_accuracy) e["poisoned_accuracy_text"] = format_fraction(*s.poisoned_accuracy);
    if (s.shadow_clean_auc) e["shadow_clean_auc_text"] = format_fraction(*s.shadow_clean_auc);
    if (s.shadow_poisoned_auc) {
      e["shadow_poisoned_auc_text"] = format_fraction(*s.shadow_poisoned_auc);
    }
    summary.push_back(e);
  }
  j["summary"] = summary;
  return j;
}

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw ConfigError("unknown report format '" + std::string(s) + "'");
}

// Writes report.csv or report.json into `dir`; returns the file path.
inline std::filesystem::path emit_report(const RunReport& report, ReportFormat format,
                                         const std::filesystem::path& dir) {
  const auto path = dir / (format == ReportFormat::csv ? "report.csv" : "report.json");
  write_text(path, format == ReportFormat::csv ? report_csv(report)
                                               : report_json(report).dump(2) + "\n");
  return path;
}

// Writes both report formats plus manifest.json (every artifact with its
// size and FNV-1a checksum) into the run directory.
inline void finalize_run(RunReport& report) {
  if (report.run_dir.empty()) throw StateError("finalize_run: run has no output directory");
  emit_report(report, ReportFormat::json, report.run_dir);
  emit_report(report, ReportFormat::csv, report.run_dir);
  report.artifacts = detail::scan_artifacts(report.run_dir);
  nlohmann::ordered_json m;
  m["run_id"] = report.config.run_id;
  m["kind"] = report.kind;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& a : report.artifacts) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(a.fnv1a));
    files.push_back({{"path", a.path}, {"bytes", a.bytes}, {"fnv1a", hex}});
  }
  m["files"] = files;
  write_text(report.run_dir / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Provenance: recompute the summary numbers from the raw per-sample files.

inline std::vector<MIScore> read_scores_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  return parse_scores_csv(in, p.string());
}

inline double accuracy_from_predictions(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  std::string line;
  std::size_t n = 0, correct = 0, line_no = 0;
  while (std::getline(in, line)) {
    if (++line_no == 1 || line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) {
      throw FormatError(p.string() + ":" + std::to_string(line_no) + ": expected 3 columns");
    }
    ++n;
    if (line.substr(a + 1, b - a - 1) == line.substr(b + 1)) ++correct;
  }
  if (n == 0) throw FormatError(p.string() + ": no predictions");
  return static_cast<double>(correct) / static_cast<double>(n);
}

// Returns one message per statistic that does not recompute bit-exactly.
inline std::vector<std::string> verify_provenance(const RunReport& report) {
  if (report.run_dir.empty()) throw StateError("verify_provenance: run has no output directory");
  std::vector<std::string> problems;
  const auto& caps = report.config.eval.fpr_caps;
  auto check_roc = [&](const std::string& file, double auc, const std::map<double, double>& tprs,
                       const std::string& what) {
    const auto scores = read_scores_file(report.run_dir / file);
    const ROCReport r = roc(scores, caps);
    if (r.auc != auc) problems.push_back(what + ": auc differs from " + file);
    for (const auto& [cap, v] : tprs) {
      if (r.tpr_at_fpr.at(cap) != v) problems.push_back(what + ": tpr differs from " + file);
    }
  };
  for (const auto& r : report.results) {
    const std::string what =
        "seed " + std::to_string(r.seed) + " class " + std::to_string(r.target_class);
    check_roc(r.clean_scores_file, r.clean_auc, r.clean_tpr_at_fpr, what + " clean");
    if (accuracy_from_predictions(report.run_dir / r.clean_predictions_file) !=
        r.clean_test_accuracy) {
      problems.push_back(what + " clean: accuracy differs from " + r.clean_predictions_file);
    }
    if (r.poisoned) {
      check_roc(r.poisoned->scores_file, r.poisoned->auc, r.poisoned->tpr_at_fpr,
                what + " poisoned");
      if (accuracy_from_predictions(report.run_dir / r.poisoned->predictions_file) !=
          r.poisoned->test_accuracy) {
        problems.push_back(what + " poisoned: accuracy differs from " +
                           r.poisoned->predictions_file);
      }
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Reloading a finished run from its report.json.

// Inverse of to_json(ExperimentConfig), routed through the config parser so
// that the same validation applies.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ConfigMap m;
  auto num = [](const nlohmann::json& v) { return v.dump(); };
  auto list = [&](const nlohmann::json& arr) {
    std::string out;
    for (const auto& v : arr) out += (out.empty() ? "" : ",") + num(v);
    return out;
  };
  m.set("run_id", j.at("run_id").get<std::string>());
  const auto& d = j.at("data");
  m.set("data.source", d.at("source").get<std::string>());
  for (const char* k : {"classes", "dim", "per_class", "spread", "center_shift"}) {
    m.set(std::string("data.") + k, num(d.at(k)));
  }
  m.set("data.path", d.at("path").get<std::string>());
  m.set("data.labels_path", d.at("labels_path").get<std::string>());
  const auto& sp = j.at("splits");
  m.set("splits.clean", num(sp.at(0)));
  m.set("splits.test", num(sp.at(1)));
  m.set("splits.shadow", num(sp.at(2)));
  m.set("encoder.hidden", list(j.at("encoder").at("hidden")));
  m.set("encoder.provenance",
        j.at("encoder").at("provenance") == "seeded-random" ? "random" : "shadow");
  for (const auto& [k, v] : j.at("train").items()) {
    m.set("train." + k, v.is_string() ? v.get<std::string>() : num(v));
  }
  for (const auto& [k, v] : j.at("defense").items()) {
    m.set("defense." + k, v.is_string() ? v.get<std::string>() : num(v));
  }
  for (const auto& [k, v] : j.at("poison").items()) {
    m.set("poison." + k, v.is_string() ? v.get<std::string>() : num(v));
  }
  const auto& e = j.at("eval");
  m.set("eval.classes", list(e.at("classes")));
  m.set("eval.fpr_caps", list(e.at("fpr_caps")));
  for (const char* k : {"shadow_attack", "n_shadows", "heuristics", "cdf_grid"}) {
    m.set(std::string("eval.") + k, num(e.at(k)));
  }
  m.set("seeds", list(j.at("seeds")));
  return experiment_config_from(m);
}

namespace detail {

inline std::map<double, double> caps_from_json(const nlohmann::json& j) {
  std::map<double, double> out;
  for (const auto& [k, v] : j.items()) out[parse_double(k, "tpr_at_fpr key")] = v.get<double>();
  return out;
}

}  // namespace detail

// Rebuilds the RunReport stored in `run_dir`/report.json.
inline RunReport load_run_report(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "report.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    RunReport r;
    r.kind = j.at("kind").get<std::string>();
    r.config = config_from_json(j.at("config"));
    r.run_dir = run_dir;
    for (const auto& e : j.at("results")) {
      ClassResult c;
      c.seed = e.at("seed").get<std::uint64_t>();
      c.target_class = e.at("class").get<int>();
      const auto& cl = e.at("clean");
      c.clean_auc = cl.at("auc").get<double>();
      c.clean_tpr_at_fpr = detail::caps_from_json(cl.at("tpr_at_fpr"));
      c.clean_test_accuracy = cl.at("test_accuracy").get<double>();
      c.clean_scores_file = cl.at("scores_file").get<std::string>();
      c.clean_predictions_file = cl.at("predictions_file").get<std::string>();
      if (e.contains("poisoned")) {
        const auto& p = e.at("poisoned");
        PoisonedMetrics pm;
        pm.auc = p.at("auc").get<double>();
        pm.tpr_at_fpr = detail::caps_from_json(p.at("tpr_at_fpr"));
        pm.test_accuracy = p.at("test_accuracy").get<double>();
        pm.poison_size = p.at("poison_size").get<std::size_t>();
        pm.poison_train_accuracy = p.at("poison_train_accuracy").get<double>();
        pm.clean_train_accuracy = p.at("clean_train_accuracy").get<double>();
        pm.epochs_run = p.at("epochs_run").get<int>();
        pm.scores_file = p.at("scores_file").get<std::string>();
        pm.predictions_file = p.at("predictions_file").get<std::string>();
        c.poisoned = pm;
      }
      if (e.contains("heuristic")) {
        const auto& h = e.at("heuristic");
        HeuristicSummary hs;
        hs.clean_median = h.at("clean_median").get<double>();
        if (h.contains("poisoned_median")) hs.poisoned_median = h.at("poisoned_median").get<double>();
        if (h.contains("ks_statistic")) {
          hs.shift = KsResult{h.at("ks_statistic").get<double>(), h.at("ks_p_value").get<double>()};
        }
        c.heuristic = hs;
      }
      if (e.contains("shadow_attack")) {
        const auto& s = e.at("shadow_attack");
        ShadowSummary ss;
        ss.clean_auc = s.at("clean_auc").get<double>();
        if (s.contains("poisoned_auc")) ss.poisoned_auc = s.at("poisoned_auc").get<double>();
        ss.excluded = s.at("excluded").get<std::size_t>();
        c.shadow = ss;
      }
      r.results.push_back(std::move(c));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace memx
