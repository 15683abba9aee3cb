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

// hcnn: synthetic corpora, preparation, flat and hierarchical training,
// evaluation and comparison tables.
//
// Exit codes: 0 success, 1 internal error, 2 bad input or configuration.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "hcnn/pipeline.hpp"
#include "hcnn/synth.hpp"

namespace fs = std::filesystem;
using namespace hcnn;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = default_jobs();
  bool no_fallback = false;
  std::string partition;
  bool quiet = false;
};

void say(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

fs::path out_dir(const Globals& g, const fs::path& fallback) { return g.out.empty() ? fallback : fs::path(g.out); }

/// Run config for training/evaluation: the prepared manifest, with an
/// explicit --config replacing everything but the preparation settings.
RunConfig training_config(const Globals& g, const PreparedDir& p) {
  RunConfig cfg = p.config;
  if (!g.config.empty()) {
    auto over = load_run_config(g.config);
    over.prep = cfg.prep;
    cfg = over;
  }
  if (g.seed) {
    const auto split_seed = cfg.prep.split_seed;
    cfg.reseed(*g.seed);
    cfg.prep.split_seed = split_seed;
  }
  if (g.no_fallback) cfg.eval.fallback = false;
  return cfg;
}

void write_config_file(const RunConfig& cfg, const fs::path& path) {
  std::ostringstream os;
  write_run_config(cfg, os);
  write_file(path, os.str());
}

EpochCallback progress(const Globals& g, const std::string& name, std::size_t epochs) {
  if (g.quiet) return {};
  return [name, epochs](std::size_t e, const EpochRecord& r) {
    std::fprintf(stderr, "%s epoch %zu/%zu loss %.4f val_f1_micro %.4f\n", name.c_str(), e + 1, epochs, r.train_loss,
                 r.val_f1_micro);
  };
}

int cmd_synth(const Globals& g, const std::string& spec_path) {
  std::ifstream in(spec_path);
  if (!in) throw IoError("cannot read synth spec '" + spec_path + "'");
  auto spec = read_synth_spec(in);
  if (g.seed) spec.seed = *g.seed;
  const auto synth = generate(spec);
  const auto dir = out_dir(g, "synth");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "corpus.xml");
    write_xml_reports(synth.corpus, out);
  }
  {
    std::ofstream out(dir / "synth_manifest.txt");
    write_manifest(synth.manifest, out);
  }
  std::cout << "label\tcount\n";
  for (const auto& [code, n] : synth.corpus.class_counts()) std::cout << code << '\t' << n << '\n';
  std::cout << "total\t" << synth.corpus.size() << '\n';
  return 0;
}

LabelledCorpus read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus '" + path + "'");
  return parse_xml_reports(in);
}

int cmd_prep(const Globals& g, const std::string& corpus_path) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed) cfg.reseed(*g.seed);
  if (g.no_fallback) cfg.eval.fallback = false;
  const auto corpus_bytes = read_file(corpus_path);
  std::istringstream in(corpus_bytes);
  const auto corpus = parse_xml_reports(in);
  const auto data = prepare(corpus, cfg, Stopwords::load(cfg.prep));
  const auto dir = out_dir(g, "prepared");
  save_prepared(data, cfg, dir, hex64(fnv1a64(corpus_bytes)));
  std::cout << "classes " << data.classes.size() << ", features " << data.features.terms.size() << ", max_len "
            << data.max_len << ", train/val/test " << data.train.docs.size() << '/' << data.val.docs.size() << '/'
            << data.test.docs.size() << ", removed " << data.removed_afrikaans.size() << ", findings "
            << data.findings.size() << '\n';
  return 0;
}

TextCnnModel load_flat(const fs::path& dir, const PreparedData& d) {
  auto ck = load_checkpoint((dir / "flat.tcnn").string());
  if (ck.vocab_hash != d.preprocessing_hash)
    throw MismatchedPreprocessing("flat.tcnn was trained on different preprocessing than " + dir.string());
  return std::move(ck.model);
}

TextCnnModel run_train_flat(const Globals& g, const PreparedDir& p, const RunConfig& cfg, const fs::path& dir) {
  auto res = train_flat(p.data, cfg, progress(g, "flat", cfg.flat.epochs));
  fs::create_directories(dir);
  save_checkpoint(res.model, p.data.preprocessing_hash, (dir / "flat.tcnn").string());
  write_file(dir / "flat_history.tsv", history_text(res.history));
  write_config_file(cfg, dir / "flat_run.ini");
  return std::move(res.model);
}

int cmd_train_flat(const Globals& g, const std::string& prepared) {
  const auto p = load_prepared(prepared);
  const auto cfg = training_config(g, p);
  run_train_flat(g, p, cfg, out_dir(g, prepared));
  return 0;
}

int cmd_train_hier(const Globals& g, const std::string& prepared) {
  const auto p = load_prepared(prepared);
  const auto cfg = training_config(g, p);
  const auto dir = out_dir(g, prepared);
  ClassPartition partition;
  if (!g.partition.empty()) {
    std::ifstream in(g.partition);
    if (!in) throw IoError("cannot read partition file '" + g.partition + "'");
    partition = read_partition(in, p.data.classes);
  } else {
    const auto flat = fs::exists(dir / "flat.tcnn") ? load_flat(dir, p.data) : run_train_flat(g, p, cfg, dir);
    partition = propose_for(p.data, flat);
  }
  say(g, "partition: " + partition.rationale);
  std::function<void(const std::string&, std::size_t, const EpochRecord&)> cb;
  if (!g.quiet)
    cb = [](const std::string& n, std::size_t e, const EpochRecord& r) {
      std::fprintf(stderr, "%s epoch %zu loss %.4f val_f1_micro %.4f\n", n.c_str(), e + 1, r.train_loss, r.val_f1_micro);
    };
  const auto h = train_hier(p.data, cfg, partition, g.jobs, cb);
  save_ensemble(h.ensemble, dir / "hier");
  write_file(dir / "hier_parent_history.tsv", history_text(h.parent_history));
  write_file(dir / "hier_binary_history.tsv", history_text(h.binary_history));
  write_file(dir / "hier_multi_history.tsv", history_text(h.multi_history));
  write_config_file(cfg, dir / "hier_run.ini");
  {
    std::ostringstream os;
    write_partition(partition, os);
    write_file(dir / "partition.txt", os.str());
  }
  return 0;
}

void write_cv(const Globals& g, const PreparedDir& p, const RunConfig& cfg, const fs::path& dir, bool hier) {
  const auto cv = cross_validate(p.data, cfg, hier, g.jobs, [&](std::size_t f) {
    say(g, "fold " + std::to_string(f + 1) + "/" + std::to_string(cfg.eval.folds) + " done");
  });
  write_file(dir / "cv_results_flat.tsv", results_text(cv.merged_flat));
  if (hier) write_file(dir / "cv_results_hier.tsv", results_text(cv.merged_hier));

  std::ostringstream folds;
  folds << "fold\tclassifier\tn\tf1_micro\tf1_macro\n";
  const auto macro = cfg.eval.macro;
  auto fold_row = [&](std::size_t f, const char* name, const std::vector<ResultRecord>& recs) {
    NamedResults nr{name, p.data.classes, recs};
    const auto rep = f1_scores(confusion_of(nr), macro);
    folds << f + 1 << '\t' << name << '\t' << recs.size() << '\t' << detail::fixed(rep.f1_micro, 6) << '\t'
          << detail::fixed(rep.f1_macro, 6) << '\n';
  };
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    fold_row(f, "flat", cv.folds[f].flat);
    if (hier) fold_row(f, "hierarchical", cv.folds[f].hier);
  }
  write_file(dir / "cv_folds.tsv", folds.str());
  for (const auto& w : cv.plan.warnings) say(g, "warning: " + w);
}

int cmd_evaluate(const Globals& g, const std::string& prepared, bool cv, bool hier_cv) {
  const auto p = load_prepared(prepared);
  const auto cfg = training_config(g, p);
  const auto dir = out_dir(g, prepared);
  fs::create_directories(dir);
  if (cv) {
    write_cv(g, p, cfg, dir, hier_cv);
    return 0;
  }
  const fs::path in_dir = prepared;
  bool any = false;
  if (fs::exists(in_dir / "flat.tcnn")) {
    write_file(dir / "results_flat.tsv", results_text(predict_flat(load_flat(in_dir, p.data), p.data.test, p.data.classes)));
    any = true;
  }
  if (fs::exists(in_dir / "hier" / "ensemble.manifest")) {
    const auto e = load_ensemble(in_dir / "hier");
    if (e.preprocessing_hash != p.data.preprocessing_hash)
      throw MismatchedPreprocessing("hierarchical ensemble was trained on different preprocessing");
    const auto res = predict_hier(e, p.data.test, cfg.eval.fallback);
    write_file(dir / "results_hier.tsv", results_text(res.records));
    write_file(dir / "routes_hier.tsv", routes_text(p.data.test.ids, res.routes));
    const auto children = child_results(e, p.data.test);
    write_file(dir / "results_child_multi.tsv", results_text(children[0].records));
    write_file(dir / "results_child_binary.tsv", results_text(children[1].records));
    any = true;
  }
  if (!any) throw IoError("no checkpoints (flat.tcnn or hier/) found in '" + prepared + "'");
  return 0;
}

std::optional<std::vector<ResultRecord>> maybe_results(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  std::istringstream in(read_file(path));
  return read_results(in);
}

int cmd_compare(const Globals& g, const std::string& prepared) {
  const auto p = load_prepared(prepared);
  const auto cfg = training_config(g, p);
  const fs::path dir = prepared;
  const auto& classes = p.data.classes;
  std::vector<NamedResults> test, other;
  if (auto r = maybe_results(dir / "results_flat.tsv")) test.push_back({"Multiclass CNN", classes, *r});
  if (auto r = maybe_results(dir / "results_hier.tsv")) test.push_back({"Hierarchical CNN", classes, *r});
  if (auto r = maybe_results(dir / "results_child_multi.tsv")) {
    const auto e = load_ensemble(dir / "hier");
    other.push_back({"Multiclass child (group b)", e.partition.group_b, *r});
    if (auto b = maybe_results(dir / "results_child_binary.tsv"))
      other.push_back({"Binary OVA child", {e.majority_label, kOtherLabel}, *b});
  }
  if (auto r = maybe_results(dir / "cv_results_flat.tsv")) other.push_back({"Multiclass CNN (cv merged)", classes, *r});
  if (auto r = maybe_results(dir / "cv_results_hier.tsv")) other.push_back({"Hierarchical CNN (cv merged)", classes, *r});
  if (test.empty() && other.empty()) throw IoError("no results files in '" + prepared + "'; run evaluate first");

  const auto table = compare_report(test, other, compare_options(cfg.eval));
  const auto out = out_dir(g, prepared);
  fs::create_directories(out);
  std::ostringstream tsv, per_class, text;
  write_comparison_tsv(table, tsv);
  write_per_class_tsv(table, per_class);
  write_comparison_text(table, text);
  write_file(out / "comparison.tsv", tsv.str());
  write_file(out / "comparison_per_class.tsv", per_class.str());
  write_file(out / "comparison.txt", text.str());
  std::cout << text.str();
  return 0;
}

int cmd_gradcheck(const Globals& g, std::size_t classes, std::size_t tokens, std::size_t maps, std::size_t dim,
                  std::size_t docs, double tolerance) {
  TextCnnConfig c;
  c.num_classes = classes;
  c.maps_per_window = maps;
  c.embedding_dim = dim;
  c.hidden_size = 6;
  c.max_len = tokens;
  c.seed = g.seed.value_or(1);
  const std::size_t vocab = 10;
  Rng rng(c.seed);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < classes; ++i) labels.push_back("c" + std::to_string(i));
  auto model = build_model(c, vocab, rng, labels);
  std::vector<EncodedDocument> set;
  for (std::size_t i = 0; i < docs; ++i) {
    EncodedDocument d;
    for (std::size_t t = 0; t < tokens; ++t) d.indices.push_back(static_cast<std::int32_t>(rng.below(vocab + 2)));
    d.label = i % classes;
    set.push_back(std::move(d));
  }
  const double err = model_grad_check(model, set, rng);
  std::printf("max relative error %.3e (tolerance %.1e): %s\n", err, tolerance, err < tolerance ? "ok" : "FAILED");
  return err < tolerance ? 0 : 1;
}

int cmd_verify(const Globals& g, const std::string& corpus_path) {
  const auto corpus = read_corpus(corpus_path);
  std::vector<AnonymizationFinding> all;
  for (const auto& r : corpus.reports()) {
    auto f = verify_anonymized(r);
    all.insert(all.end(), f.begin(), f.end());
  }
  if (g.out.empty()) {
    write_findings(all, std::cout);
  } else {
    std::ostringstream os;
    write_findings(all, os);
    write_file(g.out, os.str());
  }
  std::cerr << all.size() << " finding(s) in " << corpus.size() << " report(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hcnn: flat and hierarchical text CNN classification of labelled reports"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Run config file (key = value with [sections])");
  auto* seed_opt = app.add_option("--seed", seed, "Reseed splits, folds, bootstrap and model nodes");
  app.add_option("--out", g.out, "Output directory (file for verify)");
  app.add_option("--jobs", g.jobs, "Parallel node/fold workers")->check(CLI::PositiveNumber);
  app.add_flag("--no-fallback", g.no_fallback, "Hierarchical routing forces the parent's group choice");
  app.add_option("--partition", g.partition, "Partition file overriding the proposal (train-hier)");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");

  std::string input;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus from a spec file");
  synth->add_option("spec", input, "Synth spec file")->required();
  auto* prep = app.add_subcommand("prep", "Prepare a corpus: filter, tokenize, select, split, featurize, encode");
  prep->add_option("corpus", input, "Corpus XML file")->required();
  auto* tflat = app.add_subcommand("train-flat", "Train the flat multiclass CNN");
  tflat->add_option("prepared", input, "Prepared directory")->required();
  auto* thier = app.add_subcommand("train-hier", "Propose a partition and train the hierarchical ensemble");
  thier->add_option("prepared", input, "Prepared directory")->required();
  bool cv = false, hier_cv = false;
  auto* eval = app.add_subcommand("evaluate", "Write per-document test results, or run cross-validation");
  eval->add_option("prepared", input, "Prepared directory")->required();
  eval->add_flag("--cv", cv, "Run the k-fold protocol and merge fold results");
  eval->add_flag("--hier", hier_cv, "With --cv, also train and score the hierarchy per fold");
  auto* cmp = app.add_subcommand("compare", "Comparison table with bootstrap confidence intervals");
  cmp->add_option("prepared", input, "Directory holding results files")->required();
  std::size_t gc_classes = 3, gc_tokens = 12, gc_maps = 2, gc_dim = 4, gc_docs = 3;
  double gc_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full architecture");
  gc->add_option("--classes", gc_classes)->check(CLI::Range(2, 50));
  gc->add_option("--tokens", gc_tokens)->check(CLI::Range(5, 200));
  gc->add_option("--maps", gc_maps)->check(CLI::Range(1, 50));
  gc->add_option("--dim", gc_dim)->check(CLI::Range(1, 64));
  gc->add_option("--docs", gc_docs)->check(CLI::Range(1, 50));
  gc->add_option("--tolerance", gc_tol);
  auto* verify = app.add_subcommand("verify", "Scan a corpus for identifier-like spans");
  verify->add_option("corpus", input, "Corpus XML file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*synth) return cmd_synth(g, input);
    if (*prep) return cmd_prep(g, input);
    if (*tflat) return cmd_train_flat(g, input);
    if (*thier) return cmd_train_hier(g, input);
    if (*eval) return cmd_evaluate(g, input, cv, hier_cv);
    if (*cmp) return cmd_compare(g, input);
    if (*gc) return cmd_gradcheck(g, gc_classes, gc_tokens, gc_maps, gc_dim, gc_docs, gc_tol);
    if (*verify) return cmd_verify(g, input);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
