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

// Confusion matrices, F1-micro/macro and percentile-bootstrap intervals.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hcnn/error.hpp"
#include "hcnn/rng.hpp"

namespace hcnn {

/// Rows are gold classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> classes)
      : classes_(std::move(classes)), counts_(classes_.size() * classes_.size(), 0) {}

  const std::vector<std::string>& classes() const noexcept { return classes_; }
  std::size_t num_classes() const noexcept { return classes_.size(); }

  void add(std::size_t gold, std::size_t pred, std::size_t n = 1) { counts_[gold * classes_.size() + pred] += n; }
  std::size_t count(std::size_t gold, std::size_t pred) const { return counts_[gold * classes_.size() + pred]; }

  std::size_t total() const {
    std::size_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  std::size_t correct() const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < classes_.size(); ++i) s += count(i, i);
    return s;
  }
  double accuracy() const {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(n);
  }

  std::size_t index_of(const std::string& label) const {
    const auto it = std::find(classes_.begin(), classes_.end(), label);
    if (it == classes_.end()) throw UnknownLabel("label '" + label + "' is not one of the matrix classes");
    return static_cast<std::size_t>(it - classes_.begin());
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::vector<std::string> classes_;
  std::vector<std::size_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const std::string> golds, std::span<const std::string> preds,
                                 const std::vector<std::string>& classes) {
  if (golds.size() != preds.size()) throw InvalidConfig("confusion: gold and predicted lengths differ");
  ConfusionMatrix cm(classes);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], i);
  auto lookup = [&](const std::string& l) {
    const auto it = index.find(l);
    if (it == index.end()) throw UnknownLabel("label '" + l + "' is not one of the matrix classes");
    return it->second;
  };
  for (std::size_t i = 0; i < golds.size(); ++i) cm.add(lookup(golds[i]), lookup(preds[i]));
  return cm;
}

inline ConfusionMatrix confusion(std::span<const std::size_t> golds, std::span<const std::size_t> preds,
                                 const std::vector<std::string>& classes) {
  if (golds.size() != preds.size()) throw InvalidConfig("confusion: gold and predicted lengths differ");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i] >= classes.size() || preds[i] >= classes.size())
      throw UnknownLabel("class index out of range in confusion()");
    cm.add(golds[i], preds[i]);
  }
  return cm;
}

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
};

/// Which classes enter the macro average. AllClasses counts classes with no
/// gold and no predicted instances as f1 = 0; PresentClasses skips them.
enum class MacroAverage { AllClasses, PresentClasses };

struct MetricReport {
  double f1_micro = 0.0;
  double f1_macro = 0.0;
  std::map<std::string, ClassScores> per_class;
  std::size_t n = 0;
};

inline MetricReport f1_scores(const ConfusionMatrix& cm, MacroAverage macro = MacroAverage::AllClasses) {
  const std::size_t c = cm.num_classes();
  MetricReport rep;
  rep.n = cm.total();
  std::size_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
  double macro_sum = 0.0;
  std::size_t macro_n = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t tp = cm.count(k, k), fp = 0, fn = 0;
    for (std::size_t o = 0; o < c; ++o) {
      if (o == k) continue;
      fp += cm.count(o, k);
      fn += cm.count(k, o);
    }
    ClassScores s;
    s.support = tp + fn;
    s.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    s.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    rep.per_class[cm.classes()[k]] = s;
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
    if (macro == MacroAverage::AllClasses || tp + fp + fn > 0) {
      macro_sum += s.f1;
      ++macro_n;
    }
  }
  rep.f1_macro = macro_n == 0 ? 0.0 : macro_sum / static_cast<double>(macro_n);
  const double denom = 2.0 * static_cast<double>(tp_sum) + static_cast<double>(fp_sum + fn_sum);
  rep.f1_micro = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp_sum) / denom;
  return rep;
}

enum class Metric { F1Micro, F1Macro };

inline double metric_value(const ConfusionMatrix& cm, Metric m, MacroAverage macro = MacroAverage::AllClasses) {
  const auto rep = f1_scores(cm, macro);
  return m == Metric::F1Micro ? rep.f1_micro : rep.f1_macro;
}

struct BootstrapCI {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t resamples = 0;
  double alpha = 0.05;
};

inline constexpr std::size_t kDefaultBootstrapResamples = 1000;

/// Percentile bootstrap over (gold, pred) pairs, n-out-of-n with replacement.
/// Endpoints are nearest-rank percentiles alpha/2 and 1 - alpha/2 of the B
/// resampled metric values.
inline BootstrapCI bootstrap_ci(std::span<const std::size_t> golds, std::span<const std::size_t> preds,
                                const std::vector<std::string>& classes, Metric metric,
                                std::size_t resamples = kDefaultBootstrapResamples, double alpha = 0.05,
                                std::uint64_t seed = 0, MacroAverage macro = MacroAverage::AllClasses) {
  if (golds.empty()) throw EmptySplit("bootstrap_ci needs at least one scored document");
  if (resamples == 0) throw InvalidConfig("bootstrap_ci needs B >= 1");
  if (golds.size() != preds.size()) throw InvalidConfig("bootstrap_ci: gold and predicted lengths differ");

  BootstrapCI ci;
  ci.resamples = resamples;
  ci.alpha = alpha;
  ci.point = metric_value(confusion(golds, preds, classes), metric, macro);

  Rng rng(seed);
  const std::size_t n = golds.size();
  std::vector<double> values(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(rng.below(n));
      cm.add(golds[j], preds[j]);
    }
    values[b] = metric_value(cm, metric, macro);
  }
  std::sort(values.begin(), values.end());
  auto nearest_rank = [&](double q) {
    auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(resamples)));
    r = std::clamp<std::size_t>(r, 1, resamples);
    return values[r - 1];
  };
  ci.lower = nearest_rank(alpha / 2.0);
  ci.upper = nearest_rank(1.0 - alpha / 2.0);
  return ci;
}

}  // namespace hcnn
