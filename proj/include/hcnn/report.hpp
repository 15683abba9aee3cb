/*
 * Copyright 2026 The hcnn Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Per-document results files and the flat-vs-hierarchical comparison table.

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hcnn/error.hpp"
#include "hcnn/metrics.hpp"

namespace hcnn {

struct ResultRecord {
  std::string report_id;
  std::string gold;
  std::string predicted;
  double max_prob = 0.0;

  bool operator==(const ResultRecord&) const = default;
};

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace detail

/// `report_id<TAB>gold<TAB>predicted<TAB>max_prob`, max_prob with 6 decimals.
inline void write_results(std::span<const ResultRecord> records, std::ostream& out) {
  for (const auto& r : records)
    out << r.report_id << '\t' << r.gold << '\t' << r.predicted << '\t' << detail::fixed(r.max_prob, 6) << '\n';
}

inline std::vector<ResultRecord> read_results(std::istream& in) {
  std::vector<ResultRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    ResultRecord r;
    std::string prob;
    if (!std::getline(fields, r.report_id, '\t') || !std::getline(fields, r.gold, '\t') ||
        !std::getline(fields, r.predicted, '\t') || !std::getline(fields, prob, '\t'))
      throw InvalidConfig("results line " + std::to_string(lineno) + " does not have four tab-separated fields");
    try {
      r.max_prob = std::stod(prob);
    } catch (const std::logic_error&) {
      throw InvalidConfig("results line " + std::to_string(lineno) + " has a malformed max_prob");
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// One classifier's predictions on one split, scored over `classes`.
struct NamedResults {
  std::string classifier;
  std::vector<std::string> classes;
  std::vector<ResultRecord> records;
};

struct ComparisonRow {
  std::size_t num_classes = 0;
  std::string classifier;
  BootstrapCI f1_micro;
  BootstrapCI f1_macro;
  MetricReport metrics;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
};

struct CompareOptions {
  std::size_t resamples = kDefaultBootstrapResamples;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  MacroAverage macro = MacroAverage::AllClasses;
};

inline ConfusionMatrix confusion_of(const NamedResults& res) {
  ConfusionMatrix cm(res.classes);
  for (const auto& r : res.records) cm.add(cm.index_of(r.gold), cm.index_of(r.predicted));
  return cm;
}

inline ComparisonRow score_results(const NamedResults& res, const CompareOptions& opt) {
  ConfusionMatrix proto(res.classes);
  std::vector<std::size_t> golds, preds;
  for (const auto& r : res.records) {
    golds.push_back(proto.index_of(r.gold));
    preds.push_back(proto.index_of(r.predicted));
  }
  ComparisonRow row;
  row.num_classes = res.classes.size();
  row.classifier = res.classifier;
  row.metrics = f1_scores(confusion_of(res), opt.macro);
  row.f1_micro = bootstrap_ci(golds, preds, res.classes, Metric::F1Micro, opt.resamples, opt.alpha, opt.seed, opt.macro);
  row.f1_macro = bootstrap_ci(golds, preds, res.classes, Metric::F1Macro, opt.resamples, opt.alpha, opt.seed, opt.macro);
  return row;
}

/// Rows for `test_results` (which must share one gold sequence) followed by
/// rows for `other_results` (cross-validation merges, child models on their own
/// subsets), which are not cross-checked.
inline ComparisonTable compare_report(std::span<const NamedResults> test_results,
                                      std::span<const NamedResults> other_results = {},
                                      const CompareOptions& opt = {}) {
  for (std::size_t i = 1; i < test_results.size(); ++i) {
    const auto& a = test_results[0].records;
    const auto& b = test_results[i].records;
    bool same = a.size() == b.size();
    for (std::size_t j = 0; same && j < a.size(); ++j)
      same = a[j].report_id == b[j].report_id && a[j].gold == b[j].gold;
    if (!same)
      throw MismatchedTestSets("'" + test_results[i].classifier + "' was scored on a different test set than '" +
                               test_results[0].classifier + "'");
  }
  ComparisonTable table;
  for (const auto& r : test_results) table.rows.push_back(score_results(r, opt));
  for (const auto& r : other_results) table.rows.push_back(score_results(r, opt));
  return table;
}

inline constexpr std::array<const char*, 8> kComparisonHeader = {
    "classes", "classifier", "f1_micro", "ci_low", "ci_high", "f1_macro", "ci_low", "ci_high"};

inline std::vector<std::string> comparison_cells(const ComparisonRow& r, int digits) {
  return {std::to_string(r.num_classes),           r.classifier,
          detail::fixed(r.f1_micro.point, digits), detail::fixed(r.f1_micro.lower, digits),
          detail::fixed(r.f1_micro.upper, digits), detail::fixed(r.f1_macro.point, digits),
          detail::fixed(r.f1_macro.lower, digits), detail::fixed(r.f1_macro.upper, digits)};
}

inline void write_comparison_tsv(const ComparisonTable& t, std::ostream& out) {
  for (std::size_t i = 0; i < kComparisonHeader.size(); ++i) out << (i ? "\t" : "") << kComparisonHeader[i];
  out << '\n';
  for (const auto& r : t.rows) {
    const auto cells = comparison_cells(r, 6);
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "\t" : "") << cells[i];
    out << '\n';
  }
}

/// `classifier<TAB>class<TAB>precision<TAB>recall<TAB>f1<TAB>support`
inline void write_per_class_tsv(const ComparisonTable& t, std::ostream& out) {
  out << "classifier\tclass\tprecision\trecall\tf1\tsupport\n";
  for (const auto& r : t.rows)
    for (const auto& [label, s] : r.metrics.per_class)
      out << r.classifier << '\t' << label << '\t' << detail::fixed(s.precision, 6) << '\t'
          << detail::fixed(s.recall, 6) << '\t' << detail::fixed(s.f1, 6) << '\t' << s.support << '\n';
}

inline void write_comparison_text(const ComparisonTable& t, std::ostream& out) {
  std::vector<std::vector<std::string>> grid;
  grid.emplace_back(kComparisonHeader.begin(), kComparisonHeader.end());
  for (const auto& r : t.rows) grid.push_back(comparison_cells(r, 3));
  std::vector<std::size_t> width(kComparisonHeader.size(), 0);
  for (const auto& row : grid)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  for (const auto& row : grid) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::string cell = row[i];
      cell.resize(width[i], ' ');
      line += (i ? "  " : "") + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  for (const auto& r : t.rows) {
    out << "\n" << r.classifier << " (n=" << r.metrics.n << ")\n";
    for (const auto& [label, s] : r.metrics.per_class)
      out << "  " << label << "  p=" << detail::fixed(s.precision, 3) << "  r=" << detail::fixed(s.recall, 3)
          << "  f1=" << detail::fixed(s.f1, 3) << "  support=" << s.support << '\n';
  }
}

}  // namespace hcnn
