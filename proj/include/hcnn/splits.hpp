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

// Stratified train/validation/test splits and k-fold plans.
//
// Both work on any range of records exposing `.id` (string) and `.label`
// (ordered, printable), e.g. PathologyReport or TokenizedReport. Classes are
// processed in ascending label order and each class's members are shuffled
// with one sequential Rng, so plans are a pure function of (records, seed).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hcnn/error.hpp"
#include "hcnn/rng.hpp"

namespace hcnn {

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitAssignment {
  // ids in original record order
  std::vector<std::string> train, val, test;
};

/// Largest-remainder apportionment of n items over the given fractions. Ties
/// in the fractional part go to the earlier slot.
template <std::size_t N>
std::array<std::size_t, N> apportion(std::size_t n, const std::array<double, N>& fractions) {
  std::array<std::size_t, N> out{};
  std::array<double, N> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const double quota = fractions[i] * static_cast<double>(n);
    out[i] = static_cast<std::size_t>(std::floor(quota));
    rem[i] = quota - static_cast<double>(out[i]);
    assigned += out[i];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < N; ++i)
      if (rem[i] > rem[best]) best = i;
    ++out[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return out;
}

template <class Records>
auto group_by_label(const Records& records) {
  using Label = std::decay_t<decltype(records.begin()->label)>;
  std::map<Label, std::vector<std::size_t>> groups;
  std::size_t i = 0;
  for (const auto& r : records) groups[r.label].push_back(i++);
  return groups;
}

/// Stratified per class with largest-remainder rounding.
template <class Records>
SplitAssignment split_train_val_test(const Records& records, SplitFractions f, std::uint64_t seed) {
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9 || f.train < 0 || f.val < 0 || f.test < 0)
    throw InvalidConfig("split fractions must be non-negative and sum to 1");
  std::vector<int> slot(std::size(records), -1);
  Rng rng(seed);
  for (auto& [label, members] : group_by_label(records)) {
    const auto sizes = apportion<3>(members.size(), {f.train, f.val, f.test});
    if (sizes[0] == 0) {
      std::ostringstream os;
      os << "class " << label << " (" << members.size() << " reports) cannot appear in the training split";
      throw ClassTooSmall(os.str());
    }
    rng.shuffle(members);
    for (std::size_t k = 0; k < members.size(); ++k)
      slot[members[k]] = k < sizes[0] ? 0 : (k < sizes[0] + sizes[1] ? 1 : 2);
  }
  SplitAssignment out;
  std::size_t i = 0;
  for (const auto& r : records) {
    const int s = slot[i++];
    (s == 0 ? out.train : s == 1 ? out.val : out.test).push_back(r.id);
  }
  return out;
}

struct FoldPlan {
  std::size_t k = 0;
  std::unordered_map<std::string, std::size_t> assignments;  // id -> fold
  std::vector<std::string> warnings;                         // classes smaller than k

  std::vector<std::string> fold_ids(std::size_t fold, const std::vector<std::string>& order) const {
    std::vector<std::string> out;
    for (const auto& id : order)
      if (assignments.at(id) == fold) out.push_back(id);
    return out;
  }
};

/// Stratified k-fold assignment. Within each class members are dealt
/// round-robin, so per-class fold sizes differ by at most one. The starting
/// fold rotates from class to class to even out total fold sizes.
template <class Records>
FoldPlan kfold_plan(const Records& records, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InvalidConfig("k-fold needs k >= 2");
  FoldPlan plan;
  plan.k = k;
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  Rng rng(seed);
  std::size_t offset = 0;
  for (auto& [label, members] : group_by_label(records)) {
    if (members.size() < k) {
      std::ostringstream os;
      os << "class " << label << " has " << members.size() << " reports, fewer than k=" << k
         << "; some folds hold none of it";
      plan.warnings.push_back(os.str());
    }
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j) plan.assignments[ids[members[j]]] = (offset + j) % k;
    offset = (offset + members.size()) % k;
  }
  return plan;
}

}  // namespace hcnn
