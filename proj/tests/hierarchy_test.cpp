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

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <gtest/gtest.h>

#include "hcnn/hierarchy.hpp"
#include "hcnn/synth.hpp"

namespace hcnn {
namespace {

// A node whose answer is a pure function of the document.
struct StubNode {
  std::vector<std::string> labels;
  std::function<std::size_t(const EncodedDocument&)> pick;
  int* calls = nullptr;
};

Prediction predict(const StubNode& n, const EncodedDocument& d) {
  if (n.calls) ++*n.calls;
  Prediction p;
  p.index = n.pick(d);
  p.label = n.labels.at(p.index);
  p.probs.assign(n.labels.size(), 0.0);
  p.probs[p.index] = 1.0;
  return p;
}

StubNode constant(std::vector<std::string> labels, std::size_t i, int* calls = nullptr) {
  return {std::move(labels), [i](const EncodedDocument&) { return i; }, calls};
}

ConfusionMatrix diagonal(const std::map<std::string, std::size_t>& counts) {
  std::vector<std::string> classes;
  for (const auto& [l, n] : counts) classes.push_back(l);
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < classes.size(); ++i) cm.add(i, i, counts.at(classes[i]));
  return cm;
}

std::map<std::string, std::size_t> registry_counts() {
  std::map<std::string, std::size_t> m;
  for (const auto& [code, n] : registry_shaped_spec(0.0, 1).classes) m[code.str()] = n;
  return m;
}

TEST(ProposePartitionTest, RegistryShapedCountsIsolateTheMajority) {
  const auto counts = registry_counts();
  const auto p = propose_partition(counts, diagonal(counts));
  EXPECT_EQ(p.group_a, std::vector<std::string>{"8500/3"});
  EXPECT_EQ(p.group_b.size(), 8u);
  EXPECT_NE(p.rationale.find("8500/3 count=1417"), std::string::npos);
  EXPECT_NE(p.rationale.find("flat_recall=1.000"), std::string::npos);
}

TEST(ProposePartitionTest, EvenSplitPicksLexicographicallyFirst) {
  const std::map<std::string, std::size_t> counts{{"B", 50}, {"A", 50}};
  const auto p = propose_partition(counts, diagonal(counts));
  EXPECT_EQ(p.group_a, std::vector<std::string>{"A"});
  EXPECT_EQ(p.group_b, std::vector<std::string>{"B"});
}

TEST(ProposePartitionTest, SixtyThirtyTen) {
  const std::map<std::string, std::size_t> counts{{"A", 60}, {"B", 30}, {"C", 10}};
  const auto p = propose_partition(counts, diagonal(counts));
  EXPECT_EQ(p.group_a, std::vector<std::string>{"A"});
  EXPECT_EQ(p.group_b, (std::vector<std::string>{"B", "C"}));
}

TEST(ProposePartitionTest, PrefixWhenNoClassHoldsHalf) {
  const std::map<std::string, std::size_t> counts{{"A", 30}, {"B", 25}, {"C", 25}, {"D", 20}};
  const auto p = propose_partition(counts, diagonal(counts));
  EXPECT_EQ(p.group_a, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(p.group_b, (std::vector<std::string>{"C", "D"}));
}

TEST(ProposePartitionTest, PropertyGroupsAreValidAndAHoldsMoreThanHalf) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, std::size_t> counts;
    const auto k = 2 + rng.below(8);
    for (std::size_t i = 0; i < k; ++i) counts["c" + std::to_string(i)] = 1 + rng.below(100);
    const auto p = propose_partition(counts, diagonal(counts));
    std::vector<std::string> classes;
    std::size_t total = 0, in_a = 0, max_b = 0;
    for (const auto& [l, n] : counts) {
      classes.push_back(l);
      total += n;
      if (p.in_a(l)) in_a += n;
      else max_b = std::max(max_b, n);
    }
    EXPECT_NO_THROW(validate_partition(p, classes));
    EXPECT_FALSE(p.group_a.empty());
    EXPECT_FALSE(p.group_b.empty());
    for (const auto& l : p.group_a) EXPECT_GE(counts[l], max_b);
    // Either a already holds the majority, or it was capped at n-1 classes.
    EXPECT_TRUE(2 * in_a > total || p.group_b.size() == 1);
  }
}

TEST(ProposePartitionTest, Errors) {
  const std::map<std::string, std::size_t> one{{"A", 5}};
  EXPECT_THROW(propose_partition(one, diagonal(one)), DegenerateDistribution);
  const std::map<std::string, std::size_t> two{{"A", 5}, {"B", 3}};
  const std::map<std::string, std::size_t> other{{"A", 5}, {"C", 3}};
  EXPECT_THROW(propose_partition(two, diagonal(other)), InvalidConfig);
}

TEST(PartitionFileTest, RoundTripAndValidation) {
  const std::vector<std::string> classes{"x", "y", "z"};
  ClassPartition p{{"x"}, {"y", "z"}, "line one\nline two"};
  std::stringstream s;
  write_partition(p, s);
  EXPECT_EQ(s.str(), "# line one\n# line two\na x\nb y\nb z\n");
  const auto back = read_partition(s, classes);
  EXPECT_EQ(back.group_a, p.group_a);
  EXPECT_EQ(back.group_b, p.group_b);

  std::istringstream dup("a x\nb x\nb y\nb z\n");
  EXPECT_THROW(read_partition(dup, classes), InvalidPartition);
  std::istringstream missing("a x\nb y\n");
  EXPECT_THROW(read_partition(missing, classes), InvalidPartition);
  std::istringstream bad_group("c x\nb y\nb z\n");
  EXPECT_THROW(read_partition(bad_group, classes), InvalidPartition);
  std::istringstream extra("a x y\nb z\n");
  EXPECT_THROW(read_partition(extra, classes), InvalidPartition);
}

const std::vector<std::string> kParentLabels{"a", "b"};
const std::vector<std::string> kBinaryLabels{"8500/3", "other"};
const std::vector<std::string> kMultiLabels{"8520/3", "8522/3"};
const EncodedDocument kDoc{{1, 2, 3, 4, 5}, 0};

TEST(RouteTest, AcceptedByBinary) {
  int multi_calls = 0;
  const auto r = route(constant(kParentLabels, 0), constant(kBinaryLabels, 0), constant(kMultiLabels, 1, &multi_calls),
                       "8500/3", kDoc);
  EXPECT_EQ(r.final_label, "8500/3");
  EXPECT_EQ(r.parent_group, "a");
  ASSERT_EQ(r.path.size(), 2u);
  EXPECT_EQ(r.path[0], (RouteStep{"parent", "a", 1.0}));
  EXPECT_EQ(r.path[1], (RouteStep{"binary", "8500/3", 1.0}));
  EXPECT_EQ(multi_calls, 0);
}

TEST(RouteTest, RejectedByBinaryFallsBackToMulti) {
  const auto r = route(constant(kParentLabels, 0), constant(kBinaryLabels, 1), constant(kMultiLabels, 1), "8500/3", kDoc);
  EXPECT_EQ(r.final_label, "8522/3");
  ASSERT_EQ(r.path.size(), 3u);
  EXPECT_EQ(r.path[1].label, "other");
  EXPECT_EQ(r.path[2], (RouteStep{"multi", "8522/3", 1.0}));
}

TEST(RouteTest, GroupBSkipsBinary) {
  int binary_calls = 0;
  const auto r = route(constant(kParentLabels, 1), constant(kBinaryLabels, 0, &binary_calls), constant(kMultiLabels, 0),
                       "8500/3", kDoc);
  EXPECT_EQ(r.final_label, "8520/3");
  EXPECT_EQ(r.parent_group, "b");
  ASSERT_EQ(r.path.size(), 2u);
  EXPECT_EQ(r.path[1].model, "multi");
  EXPECT_EQ(binary_calls, 0);
}

TEST(RouteTest, NoFallbackKeepsTheMajority) {
  int multi_calls = 0;
  const auto r = route(constant(kParentLabels, 0), constant(kBinaryLabels, 1), constant(kMultiLabels, 1, &multi_calls),
                       "8500/3", kDoc, false);
  EXPECT_EQ(r.final_label, "8500/3");
  EXPECT_EQ(r.path.size(), 2u);
  EXPECT_EQ(multi_calls, 0);
}

// Documents carry their gold class index in indices[0].
TEST(RouteTest, OracleStubsAreAlwaysRight) {
  const std::vector<std::string> classes{"8500/3", "8520/3", "8522/3", "8480/3"};
  const ClassPartition part{{"8500/3", "8520/3"}, {"8522/3", "8480/3"}, ""};
  auto gold = [&](const EncodedDocument& d) { return classes[static_cast<std::size_t>(d.indices[0])]; };
  const StubNode parent{kParentLabels, [&](const EncodedDocument& d) { return part.in_a(gold(d)) ? 0u : 1u; }};
  const StubNode binary{kBinaryLabels, [&](const EncodedDocument& d) { return gold(d) == "8500/3" ? 0u : 1u; }};
  const StubNode multi{part.group_b, [&](const EncodedDocument& d) {
                         const auto it = std::find(part.group_b.begin(), part.group_b.end(), gold(d));
                         return it == part.group_b.end() ? 0u : static_cast<std::size_t>(it - part.group_b.begin());
                       }};
  Rng rng(4);
  std::size_t wrong = 0;
  for (int i = 0; i < 500; ++i) {
    EncodedDocument d{{static_cast<std::int32_t>(rng.below(classes.size())), 9, 9, 9, 9}, 0};
    const auto r = route(parent, binary, multi, "8500/3", d);
    wrong += r.final_label != gold(d);
    EXPECT_TRUE(r.path.size() == 2 || r.path.size() == 3);
  }
  // 8520/3 sits in group a but only multi can emit it, and multi does not know
  // it; every other class is routed correctly.
  EXPECT_GT(wrong, 0u);

  const ClassPartition isolated{{"8500/3"}, {"8520/3", "8522/3", "8480/3"}, ""};
  const StubNode parent2{kParentLabels, [&](const EncodedDocument& d) { return isolated.in_a(gold(d)) ? 0u : 1u; }};
  const StubNode multi2{isolated.group_b, [&](const EncodedDocument& d) {
                          const auto it = std::find(isolated.group_b.begin(), isolated.group_b.end(), gold(d));
                          return static_cast<std::size_t>(it - isolated.group_b.begin());
                        }};
  for (int i = 0; i < 500; ++i) {
    EncodedDocument d{{static_cast<std::int32_t>(rng.below(classes.size())), 9, 9, 9, 9}, 0};
    EXPECT_EQ(route(parent2, binary, multi2, "8500/3", d).final_label, gold(d));
  }
}

TEST(RelabelTest, RegistryShapedSizes) {
  const auto counts = registry_counts();
  std::vector<std::string> classes;
  std::vector<EncodedDocument> docs;
  for (const auto& [l, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) docs.push_back({{1, 2, 3}, classes.size()});
    classes.push_back(l);
  }
  const auto part = propose_partition(counts, diagonal(counts));
  const auto majority = majority_of(part, docs, classes);
  EXPECT_EQ(majority, "8500/3");
  const auto s = relabel_for_nodes(docs, classes, part, majority);
  EXPECT_EQ(s.parent.size(), 1790u);
  EXPECT_EQ(s.binary.size(), 1790u);
  EXPECT_EQ(s.multi.size(), 1790u - 1417u);
  std::set<std::size_t> multi_labels;
  for (const auto& d : s.multi) multi_labels.insert(d.label);
  EXPECT_EQ(multi_labels.size(), 8u);
  std::size_t parent_a = 0, binary_major = 0;
  for (const auto& d : s.parent) parent_a += d.label == 0;
  for (const auto& d : s.binary) binary_major += d.label == 0;
  EXPECT_EQ(parent_a, 1417u);
  EXPECT_EQ(binary_major, 1417u);

  // Parent cardinality does not depend on the partition.
  const ClassPartition wide{{"8500/3", "8520/3", "8522/3"}, {}, ""};
  ClassPartition w = wide;
  for (const auto& l : classes)
    if (!w.in_a(l)) w.group_b.push_back(l);
  EXPECT_EQ(relabel_for_nodes(docs, classes, w, majority).parent.size(), 1790u);
}

TextCnnConfig tiny(std::uint64_t seed) {
  TextCnnConfig c;
  c.maps_per_window = 4;
  c.embedding_dim = 6;
  c.hidden_size = 8;
  c.epochs = 4;
  c.batch_size = 8;
  c.max_len = 8;
  c.seed = seed;
  return c;
}

std::vector<EncodedDocument> tiny_set(Rng& rng, std::size_t per_class) {
  std::vector<EncodedDocument> out;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < per_class * (k == 0 ? 3 : 1); ++i) {
      EncodedDocument d{{}, k};
      for (int t = 0; t < 8; ++t) d.indices.push_back(static_cast<std::int32_t>(2 + 5 * k + rng.below(5)));
      out.push_back(d);
    }
  return out;
}

TEST(TrainHierarchyTest, TrainsSavesAndReloads) {
  Rng rng(5);
  const std::vector<std::string> classes{"A", "B", "C"};
  const auto tr = tiny_set(rng, 6), va = tiny_set(rng, 2);
  const ClassPartition part{{"A"}, {"B", "C"}, "test"};
  std::vector<std::string> seen_nodes;
  auto out = train_hierarchy(tr, va, classes, part, {tiny(1), tiny(2), tiny(3)}, 17, 1,
                             [&](const std::string& node, std::size_t, const EpochRecord&) { seen_nodes.push_back(node); });
  EXPECT_EQ(seen_nodes.size(), 12u);
  auto& e = out.ensemble;
  e.preprocessing_hash = "prep-hash";
  EXPECT_EQ(e.majority_label, "A");
  EXPECT_EQ(e.parent.class_labels, kParentLabels);
  EXPECT_EQ(e.child_binary.class_labels, (std::vector<std::string>{"A", "other"}));
  EXPECT_EQ(e.child_multi.class_labels, part.group_b);
  EXPECT_EQ(out.parent_history.epochs.size(), 4u);
  EXPECT_EQ(out.multi_history.epochs.size(), 4u);

  const auto dir = std::filesystem::temp_directory_path() / "hcnn_hierarchy_test";
  std::filesystem::remove_all(dir);
  save_ensemble(e, dir);
  const auto back = load_ensemble(dir);
  EXPECT_EQ(back.majority_label, "A");
  EXPECT_EQ(back.classes, classes);
  EXPECT_EQ(back.partition.group_b, part.group_b);
  for (const auto& d : va) {
    const auto r = predict_hierarchical(e, d);
    EXPECT_EQ(predict_hierarchical(back, d), r);
    EXPECT_EQ(predict_hierarchical(e, d), r);
    EXPECT_TRUE(std::find(classes.begin(), classes.end(), r.final_label) != classes.end());
  }

  // A node saved under a different preprocessing hash is refused.
  save_checkpoint(e.child_multi, "other-hash", (dir / "multi.tcnn").string());
  EXPECT_THROW(load_ensemble(dir), MismatchedPreprocessing);
  std::filesystem::remove_all(dir);
}

TEST(TrainHierarchyTest, EmptyGroups) {
  Rng rng(6);
  const std::vector<std::string> classes{"A", "B", "C"};
  const auto tr = tiny_set(rng, 3), va = tiny_set(rng, 1);
  const ClassPartition all_a{{"A", "B", "C"}, {}, ""};
  EXPECT_THROW(train_hierarchy(tr, va, classes, all_a, {tiny(1), tiny(2), tiny(3)}, 17), EmptyGroupSplit);

  std::vector<EncodedDocument> no_c;
  for (const auto& d : tr)
    if (d.label != 1 && d.label != 2) no_c.push_back(d);
  const ClassPartition part{{"A"}, {"B", "C"}, ""};
  EXPECT_THROW(train_hierarchy(no_c, va, classes, part, {tiny(1), tiny(2), tiny(3)}, 17), EmptyGroupSplit);

  const ClassPartition single_b{{"A", "B"}, {"C"}, ""};
  EXPECT_THROW(train_hierarchy(tr, va, classes, single_b, {tiny(1), tiny(2), tiny(3)}, 17), InvalidPartition);
}

}  // namespace
}  // namespace hcnn
