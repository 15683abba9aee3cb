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

// Two-level ensemble: a parent CNN routes each report to group "a" (the
// majority side) or group "b"; a binary one-vs-all CNN accepts or rejects the
// majority label, and a multiclass CNN labels group-b reports.
//
//   parent -> a -> binary -> majority             final = majority
//                         -> other  -> multi      final = multi (fallback)
//          -> b -> multi                          final = multi

#pragma once

#include <algorithm>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hcnn/checkpoint.hpp"
#include "hcnn/error.hpp"
#include "hcnn/metrics.hpp"
#include "hcnn/parallel.hpp"
#include "hcnn/textcnn.hpp"

namespace hcnn {

inline constexpr const char* kGroupA = "a";
inline constexpr const char* kGroupB = "b";
inline constexpr const char* kOtherLabel = "other";

struct ClassPartition {
  std::vector<std::string> group_a;  // majority side
  std::vector<std::string> group_b;
  std::string rationale;

  bool in_a(const std::string& label) const {
    return std::find(group_a.begin(), group_a.end(), label) != group_a.end();
  }
  bool in_b(const std::string& label) const {
    return std::find(group_b.begin(), group_b.end(), label) != group_b.end();
  }
};

/// Groups must be disjoint and together cover exactly `classes`.
inline void validate_partition(const ClassPartition& p, const std::vector<std::string>& classes) {
  std::set<std::string> seen;
  for (const auto* g : {&p.group_a, &p.group_b})
    for (const auto& l : *g)
      if (!seen.insert(l).second) throw InvalidPartition("label '" + l + "' appears in the partition twice");
  const std::set<std::string> want(classes.begin(), classes.end());
  if (seen != want) throw InvalidPartition("partition does not cover exactly the in-scope classes");
}

/// Partition file: lines `a <label>` or `b <label>`; '#' starts a comment.
inline ClassPartition read_partition(std::istream& in, const std::vector<std::string>& classes) {
  ClassPartition p;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string group, label, extra;
    if (!(fields >> group)) continue;
    if (!(fields >> label) || (fields >> extra) || (group != kGroupA && group != kGroupB))
      throw InvalidPartition("partition line must read 'a <label>' or 'b <label>': '" + line + "'");
    (group == kGroupA ? p.group_a : p.group_b).push_back(label);
  }
  validate_partition(p, classes);
  p.rationale = "manual partition file";
  return p;
}

inline void write_partition(const ClassPartition& p, std::ostream& out) {
  std::istringstream rationale(p.rationale);
  for (std::string line; std::getline(rationale, line);) out << "# " << line << '\n';
  for (const auto& l : p.group_a) out << kGroupA << ' ' << l << '\n';
  for (const auto& l : p.group_b) out << kGroupB << ' ' << l << '\n';
}

/// Group a is the largest class when it holds more than half of all reports;
/// otherwise the shortest prefix of classes (descending count, ties by label)
/// whose share exceeds one half, capped so that group b keeps at least one
/// class. The flat model's confusion matrix supplies per-class recall for the
/// rationale.
inline ClassPartition propose_partition(const std::map<std::string, std::size_t>& class_counts,
                                        const ConfusionMatrix& flat_confusion) {
  if (class_counts.size() < 2) throw DegenerateDistribution("a partition needs at least two classes");
  {
    const std::set<std::string> cm_classes(flat_confusion.classes().begin(), flat_confusion.classes().end());
    std::set<std::string> keys;
    for (const auto& [l, n] : class_counts) keys.insert(l);
    if (cm_classes != keys) throw InvalidConfig("confusion matrix classes differ from the class counts");
  }
  std::vector<std::pair<std::string, std::size_t>> order(class_counts.begin(), class_counts.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  std::size_t total = 0;
  for (const auto& [l, n] : order) total += n;

  ClassPartition p;
  std::size_t cumulative = 0, cut = 0;
  while (cut + 1 < order.size()) {
    cumulative += order[cut].second;
    ++cut;
    if (2 * cumulative > total) break;
  }
  for (std::size_t i = 0; i < order.size(); ++i) (i < cut ? p.group_a : p.group_b).push_back(order[i].first);

  const auto rep = f1_scores(flat_confusion);
  std::ostringstream why;
  why << "group a = shortest prefix (by count) holding more than half of " << total << " reports\n";
  for (const auto& [l, n] : order) {
    char share[32];
    std::snprintf(share, sizeof(share), "%.3f", static_cast<double>(n) / static_cast<double>(total));
    char recall[32];
    std::snprintf(recall, sizeof(recall), "%.3f", rep.per_class.at(l).recall);
    why << l << " count=" << n << " share=" << share << " flat_recall=" << recall << (p.in_a(l) ? " -> a" : " -> b")
        << '\n';
  }
  p.rationale = why.str();
  if (!p.rationale.empty() && p.rationale.back() == '\n') p.rationale.pop_back();
  return p;
}

/// Anything with a `predict(node, doc) -> Prediction` overload found by ADL.
template <class N>
concept NodeClassifier = requires(const N& n, const EncodedDocument& d) {
  { predict(n, d) } -> std::convertible_to<Prediction>;
};

struct RouteStep {
  std::string model;  // "parent", "binary" or "multi"
  std::string label;
  double max_prob = 0.0;

  bool operator==(const RouteStep&) const = default;
};

struct RoutedPrediction {
  std::string final_label;
  std::string parent_group;  // "a" or "b"
  std::vector<RouteStep> path;

  bool operator==(const RoutedPrediction&) const = default;
};

/// Hard-argmax routing. With `fallback` off, a binary rejection under group a
/// still yields the majority label (the parent's group choice is forced).
template <NodeClassifier Parent, NodeClassifier Binary, NodeClassifier Multi>
RoutedPrediction route(const Parent& parent, const Binary& binary, const Multi& multi,
                       const std::string& majority_label, const EncodedDocument& doc, bool fallback = true) {
  RoutedPrediction out;
  const Prediction p = predict(parent, doc);
  out.path.push_back({"parent", p.label, p.max_prob()});
  out.parent_group = p.label;
  auto run_multi = [&] {
    const Prediction m = predict(multi, doc);
    out.path.push_back({"multi", m.label, m.max_prob()});
    out.final_label = m.label;
  };
  if (p.label == kGroupA) {
    const Prediction b = predict(binary, doc);
    out.path.push_back({"binary", b.label, b.max_prob()});
    if (b.label == majority_label || !fallback)
      out.final_label = majority_label;
    else
      run_multi();
  } else {
    run_multi();
  }
  return out;
}

struct HierarchicalEnsemble {
  TextCnnModel parent;        // classes {a, b}
  TextCnnModel child_binary;  // classes {majority, other}
  TextCnnModel child_multi;   // classes = group b
  ClassPartition partition;
  std::string majority_label;
  std::vector<std::string> classes;  // all in-scope labels, global index order
  std::string preprocessing_hash;
};

inline RoutedPrediction predict_hierarchical(const HierarchicalEnsemble& e, const EncodedDocument& doc,
                                             bool fallback = true) {
  return route(e.parent, e.child_binary, e.child_multi, e.majority_label, doc, fallback);
}

struct NodeConfigs {
  TextCnnConfig parent, binary, multi;
};

struct HierarchyTraining {
  HierarchicalEnsemble ensemble;
  TrainingHistory parent_history, binary_history, multi_history;
};

/// Relabelled views of an encoded split for the three nodes. Document labels
/// index `classes`.
struct NodeSplits {
  std::vector<EncodedDocument> parent, binary, multi;
};

inline NodeSplits relabel_for_nodes(std::span<const EncodedDocument> docs, const std::vector<std::string>& classes,
                                    const ClassPartition& partition, const std::string& majority_label) {
  NodeSplits out;
  for (const auto& d : docs) {
    const auto& label = classes.at(d.label);
    out.parent.push_back({d.indices, partition.in_a(label) ? 0u : 1u});
    out.binary.push_back({d.indices, label == majority_label ? 0u : 1u});
    if (partition.in_b(label)) {
      const auto pos = std::find(partition.group_b.begin(), partition.group_b.end(), label) - partition.group_b.begin();
      out.multi.push_back({d.indices, static_cast<std::size_t>(pos)});
    }
  }
  return out;
}

/// The member of group a with the most training reports (ties by label order).
inline std::string majority_of(const ClassPartition& partition, std::span<const EncodedDocument> train,
                               const std::vector<std::string>& classes) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : partition.group_a) counts[l] = 0;
  for (const auto& d : train)
    if (partition.in_a(classes.at(d.label))) ++counts[classes[d.label]];
  if (counts.empty()) throw EmptyGroupSplit("group a is empty");
  std::string best = counts.begin()->first;
  for (const auto& [l, n] : counts)
    if (n > counts[best]) best = l;
  return best;
}

/// Trains parent (all reports, relabelled a/b), child_binary (all reports,
/// majority vs other) and child_multi (group-b reports only). Each node
/// checkpoints on its own relabelled validation split. Nodes train on up to
/// `jobs` threads. Node num_classes are filled in here.
inline HierarchyTraining train_hierarchy(std::span<const EncodedDocument> train_set,
                                         std::span<const EncodedDocument> val_set,
                                         const std::vector<std::string>& classes, const ClassPartition& partition,
                                         NodeConfigs cfgs, std::size_t vocab_size, std::size_t jobs = 1,
                                         const std::function<void(const std::string&, std::size_t, const EpochRecord&)>&
                                             on_epoch = {}) {
  validate_partition(partition, classes);
  const auto majority = majority_of(partition, train_set, classes);
  const auto tr = relabel_for_nodes(train_set, classes, partition, majority);
  const auto va = relabel_for_nodes(val_set, classes, partition, majority);
  if (tr.multi.empty()) throw EmptyGroupSplit("no training reports fall in group b");
  if (tr.multi.size() == tr.parent.size()) throw EmptyGroupSplit("no training reports fall in group a");
  if (va.multi.empty()) throw EmptyGroupSplit("no validation reports fall in group b");
  if (partition.group_b.size() < 2) throw InvalidPartition("group b needs at least two classes for the multiclass child");

  cfgs.parent.num_classes = 2;
  cfgs.binary.num_classes = 2;
  cfgs.multi.num_classes = partition.group_b.size();

  struct Job {
    std::string name;
    const TextCnnConfig* cfg;
    std::vector<std::string> labels;
    const std::vector<EncodedDocument>* train;
    const std::vector<EncodedDocument>* val;
  };
  const std::vector<Job> node_jobs{
      {"parent", &cfgs.parent, {kGroupA, kGroupB}, &tr.parent, &va.parent},
      {"binary", &cfgs.binary, {majority, kOtherLabel}, &tr.binary, &va.binary},
      {"multi", &cfgs.multi, partition.group_b, &tr.multi, &va.multi},
  };
  std::vector<TrainResult> results(node_jobs.size());
  parallel_for(node_jobs.size(), jobs, [&](std::size_t i) {
    const auto& job = node_jobs[i];
    Rng init(job.cfg->seed);
    auto model = build_model(*job.cfg, vocab_size, init, job.labels);
    EpochCallback cb;
    if (on_epoch) cb = [&](std::size_t epoch, const EpochRecord& rec) { on_epoch(job.name, epoch, rec); };
    results[i] = train(std::move(model), *job.train, *job.val, cb);
  });

  HierarchyTraining out;
  out.ensemble.parent = std::move(results[0].model);
  out.ensemble.child_binary = std::move(results[1].model);
  out.ensemble.child_multi = std::move(results[2].model);
  out.ensemble.partition = partition;
  out.ensemble.majority_label = majority;
  out.ensemble.classes = classes;
  out.parent_history = std::move(results[0].history);
  out.binary_history = std::move(results[1].history);
  out.multi_history = std::move(results[2].history);
  return out;
}

// Ensemble directory: ensemble.manifest plus three `tcnn v1` files and the
// partition file.
inline void save_ensemble(const HierarchicalEnsemble& e, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_checkpoint(e.parent, e.preprocessing_hash, (dir / "parent.tcnn").string());
  save_checkpoint(e.child_binary, e.preprocessing_hash, (dir / "binary.tcnn").string());
  save_checkpoint(e.child_multi, e.preprocessing_hash, (dir / "multi.tcnn").string());
  {
    std::ofstream out(dir / "partition.txt");
    write_partition(e.partition, out);
  }
  std::ofstream out(dir / "ensemble.manifest");
  if (!out) throw IoError("cannot write ensemble manifest in '" + dir.string() + "'");
  out << "hcnn-ensemble v1\n"
      << "parent=parent.tcnn\nbinary=binary.tcnn\nmulti=multi.tcnn\npartition=partition.txt\n"
      << "majority=" << e.majority_label << '\n';
  out << "classes=";
  for (std::size_t i = 0; i < e.classes.size(); ++i) out << (i ? "," : "") << e.classes[i];
  out << "\npreprocessing_hash=" << e.preprocessing_hash << '\n';
}

inline HierarchicalEnsemble load_ensemble(const std::filesystem::path& dir) {
  std::ifstream in(dir / "ensemble.manifest");
  if (!in) throw IoError("cannot read '" + (dir / "ensemble.manifest").string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "hcnn-ensemble v1") throw CheckpointError("not an hcnn-ensemble v1 manifest");
  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* k : {"parent", "binary", "multi", "partition", "majority", "classes", "preprocessing_hash"})
    if (!kv.count(k)) throw CheckpointError(std::string("ensemble manifest lacks '") + k + "'");

  HierarchicalEnsemble e;
  e.majority_label = kv["majority"];
  e.classes = detail::split(kv["classes"], ',');
  e.preprocessing_hash = kv["preprocessing_hash"];
  auto node = [&](const std::string& key) {
    auto ck = load_checkpoint((dir / kv[key]).string());
    if (ck.vocab_hash != e.preprocessing_hash)
      throw MismatchedPreprocessing("ensemble node '" + key + "' was trained on different preprocessing");
    return std::move(ck.model);
  };
  e.parent = node("parent");
  e.child_binary = node("binary");
  e.child_multi = node("multi");
  std::ifstream pin(dir / kv["partition"]);
  if (!pin) throw IoError("cannot read the ensemble partition file");
  e.partition = read_partition(pin, e.classes);
  if (e.child_multi.class_labels != e.partition.group_b)
    throw CheckpointError("multiclass child classes differ from partition group b");
  return e;
}

}  // namespace hcnn
