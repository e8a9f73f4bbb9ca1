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
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "memx/core/error.hpp"
#include "memx/core/parallel.hpp"
#include "memx/core/tensor.hpp"
#include "memx/data/csv.hpp"

namespace memx {

struct HeuristicSample {
  std::size_t row = 0;
  double d_in = 0.0;   // nearest same-class neighbour, self excluded
  double d_out = 0.0;  // nearest other-class point
  double h = 0.0;      // (d_out - d_in) / min(d_out, d_in)
  bool degenerate = false;  // a zero distance; h is +-inf
};

struct HeuristicReport {
  int target_class = 0;
  std::vector<HeuristicSample> samples;

  std::vector<double> finite_h() const {
    std::vector<double> out;
    for (const auto& s : samples) {
      if (!s.degenerate) out.push_back(s.h);
    }
    return out;
  }
};

inline double exposure_heuristic(double d_in, double d_out) {
  if (d_in == 0.0) return std::numeric_limits<double>::infinity();
  if (d_out == 0.0) return -std::numeric_limits<double>::infinity();
  return (d_out - d_in) / std::min(d_out, d_in);
}

// Exhaustive nearest-neighbour search for every row labelled t. A
// duplicate same-class point (d_in = 0) yields h = +inf and an
// other-class duplicate (d_out = 0) yields -inf; both are flagged.
inline HeuristicReport heuristic_h(const Tensor2& features, std::span<const int> labels,
                                   int t, std::size_t workers = 1) {
  if (labels.size() != features.rows()) throw DimensionError("heuristic_h: label count mismatch");
  std::vector<std::size_t> targets;
  std::size_t others = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == t) {
      targets.push_back(i);
    } else {
      ++others;
    }
  }
  if (targets.size() < 2) {
    throw ArgumentError("heuristic_h: class " + std::to_string(t) + " needs >= 2 samples");
  }
  if (others == 0) throw ArgumentError("heuristic_h: no samples outside class " + std::to_string(t));

  HeuristicReport report;
  report.target_class = t;
  report.samples.resize(targets.size());
  parallel_for(targets.size(), workers, [&](std::size_t k) {
    const std::size_t i = targets[k];
    const auto xi = features.row(i);
    double best_in = std::numeric_limits<double>::infinity();
    double best_out = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j == i) continue;
      const double d2 = squared_l2(xi, features.row(j));
      if (labels[j] == t) {
        best_in = std::min(best_in, d2);
      } else {
        best_out = std::min(best_out, d2);
      }
    }
    HeuristicSample s;
    s.row = i;
    s.d_in = std::sqrt(best_in);
    s.d_out = std::sqrt(best_out);
    s.h = exposure_heuristic(s.d_in, s.d_out);
    s.degenerate = !std::isfinite(s.h);
    report.samples[k] = s;
  });
  return report;
}

// Fraction of `sorted` values <= x.
inline double empirical_cdf(std::span<const double> sorted, double x) {
  if (sorted.empty()) return 0.0;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

struct CdfPoint {
  double h = 0.0;
  double fraction = 0.0;
};

// Empirical CDF of the finite h values sampled at `grid_size` evenly spaced
// points over [min h, max h]. A degenerate range yields a single point.
inline std::vector<CdfPoint> export_cdf(const HeuristicReport& report, std::size_t grid_size) {
  auto hs = report.finite_h();
  if (hs.empty()) throw ArgumentError("export_cdf: no finite heuristic values");
  if (grid_size < 1) throw ArgumentError("export_cdf: grid_size must be >= 1");
  std::sort(hs.begin(), hs.end());
  const double lo = hs.front();
  const double hi = hs.back();
  std::vector<CdfPoint> out;
  if (lo == hi || grid_size == 1) {
    out.push_back({hi, 1.0});
    return out;
  }
  for (std::size_t k = 0; k < grid_size; ++k) {
    const double x = k + 1 == grid_size
                         ? hi
                         : lo + (hi - lo) * static_cast<double>(k) /
                                    static_cast<double>(grid_size - 1);
    out.push_back({x, empirical_cdf(hs, x)});
  }
  return out;
}

inline std::string cdf_csv(std::span<const CdfPoint> cdf) {
  std::ostringstream out;
  out << "h,fraction\n";
  for (const auto& p : cdf) {
    out << detail::format_double(p.h) << ',' << detail::format_double(p.fraction) << '\n';
  }
  return out.str();
}

// Columns row,d_in,d_out,h,flag; flag is 1 for degenerate rows.
inline std::string heuristic_csv(const HeuristicReport& report) {
  std::ostringstream out;
  out << "row,d_in,d_out,h,flag\n";
  for (const auto& s : report.samples) {
    out << s.row << ',' << detail::format_double(s.d_in) << ','
        << detail::format_double(s.d_out) << ','
        << (std::isinf(s.h) ? (s.h > 0 ? "inf" : "-inf") : detail::format_double(s.h)) << ','
        << (s.degenerate ? 1 : 0) << '\n';
  }
  return out.str();
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sided two-sample Kolmogorov-Smirnov test of H1: `a` is
// stochastically smaller than `b` (F_a >= F_b). Uses the asymptotic
// p-value exp(-2 n m / (n + m) D^2).
inline KsResult ks_one_sided_less(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("ks_one_sided_less: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  for (double x : pts) d = std::max(d, empirical_cdf(a, x) - empirical_cdf(b, x));
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  return {d, std::exp(-2.0 * n * m / (n + m) * d * d)};
}

}  // namespace memx
