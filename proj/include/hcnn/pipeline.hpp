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

// End-to-end pipeline: preparation, flat and hierarchical training, test-set
// evaluation and the cross-validation protocol. In-memory functions first,
// then the prepared-directory file layout used by the CLI.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hcnn/anonymization.hpp"
#include "hcnn/checkpoint.hpp"
#include "hcnn/config.hpp"
#include "hcnn/corpus.hpp"
#include "hcnn/hash.hpp"
#include "hcnn/hierarchy.hpp"
#include "hcnn/metrics.hpp"
#include "hcnn/parallel.hpp"
#include "hcnn/report.hpp"
#include "hcnn/splits.hpp"
#include "hcnn/textcnn.hpp"
#include "hcnn/textprep.hpp"

namespace hcnn {

struct EncodedSplit {
  std::vector<std::string> ids;
  std::vector<EncodedDocument> docs;
};

struct PreparedData {
  std::vector<std::string> classes;       // in-scope labels; document labels index this
  std::vector<TokenizedReport> reports;   // selected, tokenized, before feature filtering
  FeatureSet features;
  Vocabulary vocab;
  std::size_t max_len = 0;
  EncodedSplit train, val, test;
  std::vector<std::string> removed_afrikaans;
  std::vector<AnonymizationFinding> findings;
  std::string preprocessing_hash;
};

struct Stopwords {
  StopwordSet en, af, both;

  static Stopwords load(const PrepConfig& p) {
    Stopwords s{load_stopwords(p.en_stopwords), load_stopwords(p.af_stopwords), {}};
    s.both = s.en;
    s.both.insert(s.af.begin(), s.af.end());
    return s;
  }
};

inline std::size_t widest_window(const RunConfig& c) {
  std::size_t w = 0;
  for (const auto* n : {&c.flat, &c.parent, &c.binary, &c.multi}) w = std::max(w, n->max_window());
  return w;
}

inline std::string preprocessing_fingerprint(const FeatureSet& fs, std::size_t max_len,
                                             const std::vector<std::string>& classes) {
  std::ostringstream os;
  write_features(fs, os);
  os << "max_len=" << max_len << "\nclasses=";
  for (const auto& c : classes) os << c << ',';
  return hex64(fnv1a64(os.str()));
}

/// Fits features on the training ids and encodes all three splits. Shared by
/// `prepare` and every cross-validation fold.
inline void fit_and_encode(PreparedData& d, const std::vector<std::string>& train_ids,
                           const std::vector<std::string>& val_ids, const std::vector<std::string>& test_ids,
                           const RunConfig& cfg) {
  std::unordered_map<std::string, const TokenizedReport*> by_id;
  for (const auto& r : d.reports) by_id.emplace(r.id, &r);
  std::unordered_map<std::string, std::size_t> class_index;
  for (std::size_t i = 0; i < d.classes.size(); ++i) class_index.emplace(d.classes[i], i);

  std::vector<std::vector<std::string>> train_tokens;
  for (const auto& id : train_ids) train_tokens.push_back(by_id.at(id)->tokens);
  const auto model = fit_tfidf(std::span<const std::vector<std::string>>(train_tokens));
  d.features = select_top_features(model, cfg.prep.tfidf_k);
  d.vocab = build_vocabulary(d.features);

  if (cfg.prep.max_len > 0) {
    d.max_len = cfg.prep.max_len;
  } else {
    std::vector<std::size_t> lengths;
    for (const auto& t : train_tokens) lengths.push_back(filter_document(t, d.features).size());
    d.max_len = percentile_length(lengths, cfg.prep.max_len_percentile);
  }
  d.max_len = std::max(d.max_len, widest_window(cfg));

  auto encode_split = [&](const std::vector<std::string>& ids, EncodedSplit& out) {
    out = {};
    for (const auto& id : ids) {
      const auto* r = by_id.at(id);
      out.ids.push_back(id);
      out.docs.push_back(
          encode(filter_document(r->tokens, d.features), d.vocab, d.max_len, class_index.at(r->label.str())));
    }
  };
  encode_split(train_ids, d.train);
  encode_split(val_ids, d.val);
  encode_split(test_ids, d.test);
  d.preprocessing_hash = preprocessing_fingerprint(d.features, d.max_len, d.classes);
}

/// Anonymization scan -> Afrikaans filter -> tokenize -> class selection ->
/// stratified split -> TF-IDF on train -> feature filter -> encode.
inline PreparedData prepare(const LabelledCorpus& corpus, const RunConfig& cfg, const Stopwords& sw) {
  PreparedData d;
  for (const auto& r : corpus.reports()) {
    auto f = verify_anonymized(r);
    d.findings.insert(d.findings.end(), f.begin(), f.end());
  }

  std::vector<PathologyReport> kept;
  for (const auto& r : corpus.reports()) {
    if (is_afrikaans_only(split_words(r.text), sw.af, sw.en, cfg.prep.afrikaans_threshold))
      d.removed_afrikaans.push_back(r.id);
    else
      kept.push_back(r);
  }
  if (kept.empty()) throw EmptySelection("every report was removed by the language filter");
  const auto selected = select_classes(LabelledCorpus(std::move(kept)), cfg.prep.min_class_count,
                                       cfg.prep.max_class_count, cfg.prep.always_include);
  for (const auto& [code, n] : selected.class_counts()) d.classes.push_back(code.str());
  if (d.classes.size() < 2) throw EmptySelection("class selection kept fewer than two classes");
  for (const auto& r : selected.reports()) d.reports.push_back({r.id, tokenize(r.text, sw.both), r.label});

  const auto split = split_train_val_test(d.reports, cfg.prep.split, cfg.prep.split_seed);
  if (split.val.empty() || split.test.empty()) throw EmptySplit("validation or test split came out empty");
  fit_and_encode(d, split.train, split.val, split.test, cfg);
  return d;
}

inline TextCnnConfig node_config(TextCnnConfig c, std::size_t num_classes, std::size_t max_len) {
  c.num_classes = num_classes;
  c.max_len = max_len;
  return c;
}

inline TrainResult train_flat(const PreparedData& d, const RunConfig& cfg, const EpochCallback& on_epoch = {}) {
  const auto c = node_config(cfg.flat, d.classes.size(), d.max_len);
  Rng init(c.seed);
  return train(build_model(c, d.vocab.size(), init, d.classes), d.train.docs, d.val.docs, on_epoch);
}

/// Partition from the training-split class distribution and the flat model's
/// validation confusion matrix.
inline ClassPartition propose_for(const PreparedData& d, const TextCnnModel& flat) {
  std::map<std::string, std::size_t> counts;
  for (const auto& c : d.classes) counts[c] = 0;
  for (const auto& doc : d.train.docs) ++counts[d.classes[doc.label]];
  return propose_partition(counts, evaluate_confusion(flat, d.val.docs));
}

inline HierarchyTraining train_hier(const PreparedData& d, const RunConfig& cfg, const ClassPartition& partition,
                                    std::size_t jobs = 1,
                                    const std::function<void(const std::string&, std::size_t, const EpochRecord&)>&
                                        on_epoch = {}) {
  NodeConfigs nodes{node_config(cfg.parent, 2, d.max_len), node_config(cfg.binary, 2, d.max_len),
                    node_config(cfg.multi, 2, d.max_len)};
  auto out = train_hierarchy(d.train.docs, d.val.docs, d.classes, partition, nodes, d.vocab.size(), jobs, on_epoch);
  out.ensemble.preprocessing_hash = d.preprocessing_hash;
  return out;
}

inline std::vector<ResultRecord> predict_flat(const TextCnnModel& model, const EncodedSplit& split,
                                              const std::vector<std::string>& classes) {
  std::vector<ResultRecord> out;
  ForwardTrace tr;
  for (std::size_t i = 0; i < split.docs.size(); ++i) {
    const auto p = predict(model, split.docs[i], tr);
    out.push_back({split.ids[i], classes.at(split.docs[i].label), p.label, p.max_prob()});
  }
  return out;
}

struct HierResults {
  std::vector<ResultRecord> records;
  std::vector<RoutedPrediction> routes;
};

inline HierResults predict_hier(const HierarchicalEnsemble& e, const EncodedSplit& split, bool fallback) {
  HierResults out;
  for (std::size_t i = 0; i < split.docs.size(); ++i) {
    auto routed = predict_hierarchical(e, split.docs[i], fallback);
    out.records.push_back({split.ids[i], e.classes.at(split.docs[i].label), routed.final_label,
                           routed.path.back().max_prob});
    out.routes.push_back(std::move(routed));
  }
  return out;
}

/// Child models scored on their own relabelled test subsets.
inline std::vector<NamedResults> child_results(const HierarchicalEnsemble& e, const EncodedSplit& test) {
  NamedResults multi{"multiclass child (test, group b)", e.partition.group_b, {}};
  NamedResults binary{"binary OVA child (test)", {e.majority_label, kOtherLabel}, {}};
  ForwardTrace tr;
  for (std::size_t i = 0; i < test.docs.size(); ++i) {
    const auto& gold = e.classes.at(test.docs[i].label);
    const auto b = predict(e.child_binary, test.docs[i], tr);
    binary.records.push_back({test.ids[i], gold == e.majority_label ? gold : kOtherLabel, b.label, b.max_prob()});
    if (e.partition.in_b(gold)) {
      const auto m = predict(e.child_multi, test.docs[i], tr);
      multi.records.push_back({test.ids[i], gold, m.label, m.max_prob()});
    }
  }
  return {multi, binary};
}

inline CompareOptions compare_options(const EvalConfig& e) {
  return {e.bootstrap_resamples, e.alpha, e.bootstrap_seed, e.macro};
}

// ---------------------------------------------------------------------------
// Cross-validation protocol: fold f is the test set, fold (f + 1) mod k the
// validation set, the rest train. Features and max_len are refit per fold.
// Fold results are merged in fold order before bootstrapping.

struct FoldOutcome {
  std::vector<ResultRecord> flat;
  std::vector<ResultRecord> hier;
};

struct CrossValidation {
  FoldPlan plan;
  std::vector<FoldOutcome> folds;
  std::vector<ResultRecord> merged_flat, merged_hier;
};

inline CrossValidation cross_validate(const PreparedData& base, const RunConfig& cfg, bool with_hierarchy,
                                      std::size_t jobs = 1,
                                      const std::function<void(std::size_t fold)>& on_fold_done = {}) {
  CrossValidation cv;
  cv.plan = kfold_plan(base.reports, cfg.eval.folds, cfg.eval.fold_seed);
  const std::size_t k = cfg.eval.folds;
  std::vector<std::string> order;
  for (const auto& r : base.reports) order.push_back(r.id);
  cv.folds.resize(k);

  parallel_for(k, jobs, [&](std::size_t f) {
    std::vector<std::string> train_ids, val_ids, test_ids;
    for (const auto& id : order) {
      const auto fold = cv.plan.assignments.at(id);
      (fold == f ? test_ids : fold == (f + 1) % k ? val_ids : train_ids).push_back(id);
    }
    PreparedData d;
    d.classes = base.classes;
    d.reports = base.reports;
    fit_and_encode(d, train_ids, val_ids, test_ids, cfg);
    auto fold_cfg = cfg;
    fold_cfg.reseed(Rng::derive(cfg.eval.fold_seed, f));
    auto flat = train_flat(d, fold_cfg);
    cv.folds[f].flat = predict_flat(flat.model, d.test, d.classes);
    if (with_hierarchy) {
      auto hier = train_hier(d, fold_cfg, propose_for(d, flat.model));
      cv.folds[f].hier = predict_hier(hier.ensemble, d.test, cfg.eval.fallback).records;
    }
    if (on_fold_done) on_fold_done(f);
  });
  for (const auto& f : cv.folds) {
    cv.merged_flat.insert(cv.merged_flat.end(), f.flat.begin(), f.flat.end());
    cv.merged_hier.insert(cv.merged_hier.end(), f.hier.begin(), f.hier.end());
  }
  return cv;
}

// ---------------------------------------------------------------------------
// Prepared directory layout
//
//   run_manifest.ini   resolved config + [artifacts] (hashes, max_len, counts)
//   features.txt       tfidf-features v1
//   tokens.tsv         id<TAB>label<TAB>tokens   (selected reports, pre-filter)
//   train.enc / val.enc / test.enc
//   findings.tsv       anonymization findings
//   removed.tsv        id<TAB>reason
//
// Encoded split files:
//   hcnn-encoded v1 max_len=<n> vocab=<V> classes=<c1,c2,...>
//   id<TAB>class_index<TAB>i1 i2 ...

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read '" + p.string() + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string encode_split_text(const EncodedSplit& s, const PreparedData& d) {
  std::ostringstream os;
  os << "hcnn-encoded v1 max_len=" << d.max_len << " vocab=" << d.vocab.size() << " classes=";
  for (std::size_t i = 0; i < d.classes.size(); ++i) os << (i ? "," : "") << d.classes[i];
  os << '\n';
  for (std::size_t i = 0; i < s.docs.size(); ++i) {
    os << s.ids[i] << '\t' << s.docs[i].label << '\t';
    for (std::size_t j = 0; j < s.docs[i].indices.size(); ++j) os << (j ? " " : "") << s.docs[i].indices[j];
    os << '\n';
  }
  return os.str();
}

inline EncodedSplit parse_split_text(const std::string& text, std::size_t max_len, std::size_t num_classes) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("hcnn-encoded v1 ", 0) != 0) throw InvalidConfig("not an hcnn-encoded v1 file");
  EncodedSplit s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, label, indices;
    std::getline(fields, id, '\t');
    std::getline(fields, label, '\t');
    std::getline(fields, indices);
    EncodedDocument doc;
    doc.label = detail::parse_value<std::size_t>("label", label);
    std::istringstream idx(indices);
    for (std::int32_t v; idx >> v;) doc.indices.push_back(v);
    if (doc.indices.size() != max_len || doc.label >= num_classes)
      throw InvalidConfig("encoded document '" + id + "' does not match the prepared max_len/classes");
    s.ids.push_back(id);
    s.docs.push_back(std::move(doc));
  }
  return s;
}

inline void save_prepared(const PreparedData& d, const RunConfig& cfg, const fs::path& dir,
                          const std::string& corpus_hash) {
  fs::create_directories(dir);
  std::map<std::string, std::string> files;
  {
    std::ostringstream os;
    write_features(d.features, os);
    files["features.txt"] = os.str();
  }
  {
    std::ostringstream os;
    for (const auto& r : d.reports) {
      os << r.id << '\t' << r.label.str() << '\t';
      for (std::size_t i = 0; i < r.tokens.size(); ++i) os << (i ? " " : "") << r.tokens[i];
      os << '\n';
    }
    files["tokens.tsv"] = os.str();
  }
  files["train.enc"] = encode_split_text(d.train, d);
  files["val.enc"] = encode_split_text(d.val, d);
  files["test.enc"] = encode_split_text(d.test, d);
  {
    std::ostringstream os;
    write_findings(d.findings, os);
    files["findings.tsv"] = os.str();
  }
  {
    std::ostringstream os;
    for (const auto& id : d.removed_afrikaans) os << id << "\tafrikaans-only\n";
    files["removed.tsv"] = os.str();
  }
  for (const auto& [name, bytes] : files) write_file(dir / name, bytes);

  std::ostringstream man;
  write_run_config(cfg, man);
  man << "\n[artifacts]\ncorpus_hash = " << corpus_hash << "\npreprocessing_hash = " << d.preprocessing_hash
      << "\nmax_len = " << d.max_len << "\nvocab_size = " << d.vocab.size() << "\nclasses = ";
  for (std::size_t i = 0; i < d.classes.size(); ++i) man << (i ? "," : "") << d.classes[i];
  man << "\nreports = " << d.reports.size() << "\ntrain = " << d.train.docs.size() << "\nval = " << d.val.docs.size()
      << "\ntest = " << d.test.docs.size() << "\nremoved_afrikaans = " << d.removed_afrikaans.size()
      << "\nanonymization_findings = " << d.findings.size() << '\n';
  for (const auto& [name, bytes] : files) man << "hash_" << fs::path(name).stem().string() << fs::path(name).extension().string().substr(1) << " = " << hex64(fnv1a64(bytes)) << '\n';
  write_file(dir / "run_manifest.ini", man.str());
}

struct PreparedDir {
  RunConfig config;
  PreparedData data;
};

inline PreparedDir load_prepared(const fs::path& dir) {
  PreparedDir out;
  const auto manifest = read_file(dir / "run_manifest.ini");
  {
    std::istringstream in(manifest);
    out.config = read_run_config(in);
  }
  boost::property_tree::ptree tree;
  {
    std::istringstream in(manifest);
    boost::property_tree::read_ini(in, tree);
  }
  auto& d = out.data;
  try {
    d.classes = detail::split(tree.get<std::string>("artifacts.classes"), ',');
    d.max_len = tree.get<std::size_t>("artifacts.max_len");
    d.preprocessing_hash = tree.get<std::string>("artifacts.preprocessing_hash");
  } catch (const boost::property_tree::ptree_error& e) {
    throw InvalidConfig(std::string("run manifest lacks artifacts: ") + e.what());
  }
  {
    std::istringstream in(read_file(dir / "features.txt"));
    d.features = read_features(in);
    d.vocab = build_vocabulary(d.features);
  }
  if (preprocessing_fingerprint(d.features, d.max_len, d.classes) != d.preprocessing_hash)
    throw MismatchedPreprocessing("features.txt does not match the run manifest's preprocessing hash");
  {
    std::istringstream in(read_file(dir / "tokens.tsv"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto parts = detail::split(line, '\t');
      if (parts.size() != 3) throw InvalidConfig("malformed tokens.tsv line");
      TokenizedReport r{parts[0], {}, parse_morphology_code(parts[1])};
      std::istringstream toks(parts[2]);
      for (std::string t; toks >> t;) r.tokens.push_back(t);
      d.reports.push_back(std::move(r));
    }
  }
  d.train = parse_split_text(read_file(dir / "train.enc"), d.max_len, d.classes.size());
  d.val = parse_split_text(read_file(dir / "val.enc"), d.max_len, d.classes.size());
  d.test = parse_split_text(read_file(dir / "test.enc"), d.max_len, d.classes.size());
  return out;
}

inline std::string history_text(const TrainingHistory& h) {
  std::ostringstream os;
  os << "epoch\ttrain_loss\tval_f1_micro\tval_f1_macro\tbest\n";
  for (std::size_t e = 0; e < h.epochs.size(); ++e)
    os << e + 1 << '\t' << detail::fixed(h.epochs[e].train_loss, 6) << '\t' << detail::fixed(h.epochs[e].val_f1_micro, 6)
       << '\t' << detail::fixed(h.epochs[e].val_f1_macro, 6) << '\t' << (static_cast<long>(e) == h.best_epoch ? 1 : 0)
       << '\n';
  return os.str();
}

inline std::string results_text(const std::vector<ResultRecord>& records) {
  std::ostringstream os;
  write_results(records, os);
  return os.str();
}

inline std::string routes_text(const std::vector<std::string>& ids, const std::vector<RoutedPrediction>& routes) {
  std::ostringstream os;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    os << ids[i] << '\t' << routes[i].parent_group << '\t' << routes[i].final_label << '\t';
    for (std::size_t j = 0; j < routes[i].path.size(); ++j)
      os << (j ? " > " : "") << routes[i].path[j].model << ':' << routes[i].path[j].label;
    os << '\n';
  }
  return os.str();
}

}  // namespace hcnn
