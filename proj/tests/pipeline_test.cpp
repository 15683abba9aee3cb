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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "hcnn/config.hpp"
#include "hcnn/pipeline.hpp"
#include "hcnn/synth.hpp"

namespace hcnn {
namespace {

namespace fs = std::filesystem;

std::string write_config(const RunConfig& c) {
  std::ostringstream out;
  write_run_config(c, out);
  return out.str();
}

RunConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return read_run_config(in);
}

TEST(RunConfigTest, DefaultsMatchTheReferenceSetup) {
  const RunConfig c;
  EXPECT_EQ(c.prep.tfidf_k, 1400u);
  for (const auto* n : {&c.flat, &c.parent, &c.binary, &c.multi}) {
    EXPECT_EQ(n->window_sizes, (std::vector<std::size_t>{3, 4, 5}));
    EXPECT_EQ(n->maps_per_window, 100u);
    EXPECT_EQ(n->dropout_rate, 0.5);
    EXPECT_EQ(n->epochs, 147u);
    EXPECT_EQ(n->batch_size, 75u);
    EXPECT_EQ(n->embedding_dim, 128u);
  }
  EXPECT_EQ(c.eval.folds, 10u);
  EXPECT_EQ(c.prep.split.train, 0.8);
  EXPECT_EQ(c.prep.split.val, 0.1);
  EXPECT_EQ(c.prep.split.test, 0.1);
  EXPECT_EQ(c.eval.bootstrap_resamples, 1000u);
}

TEST(RunConfigTest, RoundTrip) {
  RunConfig c;
  c.reseed(17);
  c.multi.epochs = 9;
  c.prep.max_len = 33;
  c.prep.split = {0.7, 0.2, 0.1};
  c.eval.macro = MacroAverage::PresentClasses;
  c.eval.fallback = false;
  const auto text = write_config(c);
  EXPECT_EQ(write_config(parse_config(text)), text);
  EXPECT_NE(text.find("split = 0.7,0.2,0.1"), std::string::npos);
}

TEST(RunConfigTest, CnnSectionAppliesToEveryNodeAndKeepsSeeds) {
  const auto c = parse_config("[cnn]\nepochs = 40\nembedding_dim = 32\n[multi]\nbatch_size = 20\n");
  const RunConfig d;
  EXPECT_EQ(c.flat.epochs, 40u);
  EXPECT_EQ(c.parent.embedding_dim, 32u);
  EXPECT_EQ(c.multi.batch_size, 20u);
  EXPECT_EQ(c.binary.batch_size, 75u);
  EXPECT_EQ(c.flat.seed, d.flat.seed);
  EXPECT_EQ(c.multi.seed, d.multi.seed);
}

TEST(RunConfigTest, ArtifactsSectionIsIgnoredAndErrorsAreTyped) {
  EXPECT_NO_THROW(parse_config("[artifacts]\nanything = 1\n"));
  EXPECT_THROW(parse_config("[nope]\nx = 1\n"), InvalidConfig);
  EXPECT_THROW(parse_config("[cnn]\nepochs = many\n"), InvalidConfig);
  EXPECT_THROW(parse_config("[cnn]\nbogus = 1\n"), InvalidConfig);
  EXPECT_THROW(parse_config("[eval]\nmacro_average = sometimes\n"), InvalidConfig);
  EXPECT_THROW(parse_config("[prep]\nsplit = 0.5, 0.5\n"), InvalidConfig);
}

LabelledCorpus small_corpus(std::uint64_t seed, double overlap = 0.0) {
  SynthSpec s;
  s.classes = {{MorphologyCode{8500, 3}, 60}, {MorphologyCode{8520, 3}, 30}, {MorphologyCode{8522, 3}, 20}};
  s.seed = seed;
  s.overlap_rate = overlap;
  return generate(s).corpus;
}

RunConfig small_run() {
  RunConfig c;
  c.prep.min_class_count = 2;
  c.prep.tfidf_k = 50;
  c.for_each_node([](TextCnnConfig& n) {
    n.epochs = 3;
    n.embedding_dim = 8;
    n.maps_per_window = 4;
    n.hidden_size = 8;
    n.batch_size = 16;
  });
  return c;
}

TEST(PrepareTest, AfrikaansReportIsRemoved) {
  auto reports = small_corpus(1).reports();
  reports.push_back({"af1", "Die pasiënt het karsinoom van die bors.", MorphologyCode{8500, 3}, "biopsy"});
  const auto cfg = small_run();
  const auto d = prepare(LabelledCorpus(reports), cfg, Stopwords::load(cfg.prep));
  EXPECT_EQ(d.removed_afrikaans, std::vector<std::string>{"af1"});
  for (const auto* s : {&d.train, &d.val, &d.test})
    EXPECT_EQ(std::find(s->ids.begin(), s->ids.end(), "af1"), s->ids.end());
  EXPECT_EQ(d.train.ids.size() + d.val.ids.size() + d.test.ids.size(), 110u);
  EXPECT_LE(d.features.terms.size(), 50u);
  EXPECT_GE(d.max_len, 5u);
  for (const auto& doc : d.train.docs) EXPECT_EQ(doc.indices.size(), d.max_len);
}

TEST(PrepareTest, DeterministicAndSeedSensitive) {
  const auto cfg = small_run();
  const auto sw = Stopwords::load(cfg.prep);
  const auto a = prepare(small_corpus(2), cfg, sw), b = prepare(small_corpus(2), cfg, sw);
  EXPECT_EQ(a.preprocessing_hash, b.preprocessing_hash);
  EXPECT_EQ(a.test.ids, b.test.ids);
  auto other = cfg;
  other.prep.split_seed = 99;
  EXPECT_NE(prepare(small_corpus(2), other, sw).test.ids, a.test.ids);
}

TEST(PrepareTest, SaveLoadAndHashHandshake) {
  const auto cfg = small_run();
  const auto d = prepare(small_corpus(3), cfg, Stopwords::load(cfg.prep));
  const auto dir = fs::temp_directory_path() / "hcnn_pipeline_prep";
  fs::remove_all(dir);
  save_prepared(d, cfg, dir, "corpus-hash");
  const auto back = load_prepared(dir);
  EXPECT_EQ(back.data.preprocessing_hash, d.preprocessing_hash);
  EXPECT_EQ(back.data.classes, d.classes);
  EXPECT_EQ(back.data.max_len, d.max_len);
  ASSERT_EQ(back.data.test.docs.size(), d.test.docs.size());
  for (std::size_t i = 0; i < d.test.docs.size(); ++i) {
    EXPECT_EQ(back.data.test.docs[i].indices, d.test.docs[i].indices);
    EXPECT_EQ(back.data.test.docs[i].label, d.test.docs[i].label);
  }
  EXPECT_EQ(write_config(back.config), write_config(cfg));

  // Dropping a feature changes the fingerprint the splits were encoded under.
  auto features = read_file(dir / "features.txt");
  features.erase(features.rfind('\n', features.size() - 2) + 1);
  write_file(dir / "features.txt", features);
  EXPECT_THROW(load_prepared(dir), MismatchedPreprocessing);
  fs::remove_all(dir);
}

TEST(PipelineTest, FlatAndHierarchyEndToEnd) {
  const auto cfg = small_run();
  const auto d = prepare(small_corpus(4), cfg, Stopwords::load(cfg.prep));
  const auto flat = train_flat(d, cfg);
  EXPECT_EQ(flat.history.epochs.size(), 3u);
  const auto part = propose_for(d, flat.model);
  EXPECT_EQ(part.group_a, std::vector<std::string>{"8500/3"});
  const auto hier = train_hier(d, cfg, part, 1);
  EXPECT_EQ(hier.ensemble.preprocessing_hash, d.preprocessing_hash);
  const auto flat_records = predict_flat(flat.model, d.test, d.classes);
  const auto routed = predict_hier(hier.ensemble, d.test, true);
  ASSERT_EQ(flat_records.size(), d.test.ids.size());
  ASSERT_EQ(routed.records.size(), d.test.ids.size());
  for (std::size_t i = 0; i < d.test.ids.size(); ++i) {
    EXPECT_EQ(routed.records[i].report_id, d.test.ids[i]);
    EXPECT_EQ(routed.records[i].gold, d.classes[d.test.docs[i].label]);
    EXPECT_TRUE(std::find(d.classes.begin(), d.classes.end(), routed.records[i].predicted) != d.classes.end());
  }
  const auto children = child_results(hier.ensemble, d.test);
  ASSERT_EQ(children.size(), 2u);
  const auto hist = history_text(flat.history);
  EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 4);
}

TEST(PipelineTest, CrossValidationCoversEveryReportOnce) {
  auto cfg = small_run();
  cfg.eval.folds = 3;
  cfg.for_each_node([](TextCnnConfig& n) { n.epochs = 1; });
  const auto d = prepare(small_corpus(5), cfg, Stopwords::load(cfg.prep));
  const auto cv = cross_validate(d, cfg, false, 1, {});
  ASSERT_EQ(cv.folds.size(), 3u);
  std::set<std::string> seen;
  for (const auto& r : cv.merged_flat) EXPECT_TRUE(seen.insert(r.report_id).second) << r.report_id;
  EXPECT_EQ(seen.size(), d.reports.size());
  const auto again = cross_validate(d, cfg, false, 2, {});
  ASSERT_EQ(again.merged_flat.size(), cv.merged_flat.size());
  for (std::size_t i = 0; i < cv.merged_flat.size(); ++i) EXPECT_EQ(again.merged_flat[i], cv.merged_flat[i]);
}

// --- command line -----------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HCNN_CLI_PATH) + " -q " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() / ("hcnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
    write_file(root / "small.spec", "classes = 8500/3:60, 8520/3:30, 8522/3:20\noverlap_rate = 0.2\nseed = 3\n");
    write_file(root / "tiny.ini",
               "[prep]\nmin_class_count = 2\ntfidf_k = 60\n[cnn]\nepochs = 2\nembedding_dim = 8\nmaps_per_window = 4\n"
               "hidden_size = 8\nbatch_size = 16\n[eval]\nbootstrap_resamples = 50\n");
  }
  void TearDown() override { fs::remove_all(root); }
  std::string p(const std::string& rel) const { return (root / rel).string(); }

  fs::path root;
};

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run_cli("synth " + p("missing.spec") + " --out " + p("s")), 2);
  write_file(root / "bad.spec", "classes = 8500/3:0\n");
  EXPECT_EQ(run_cli("synth " + p("bad.spec") + " --out " + p("s")), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("prep " + p("nothing.xml") + " --out " + p("x")), 2);
  EXPECT_EQ(run_cli("gradcheck"), 0);
}

TEST_F(CliTest, SynthIsDeterministicAndSeedable) {
  ASSERT_EQ(run_cli("synth " + p("small.spec") + " --out " + p("a")), 0);
  ASSERT_EQ(run_cli("synth " + p("small.spec") + " --out " + p("b")), 0);
  ASSERT_EQ(run_cli("synth " + p("small.spec") + " --seed 9 --out " + p("c")), 0);
  ASSERT_EQ(run_cli("synth " + p("small.spec") + " --seed 9 --out " + p("d")), 0);
  EXPECT_EQ(read_file(p("a/corpus.xml")), read_file(p("b/corpus.xml")));
  EXPECT_EQ(read_file(p("c/corpus.xml")), read_file(p("d/corpus.xml")));
  EXPECT_NE(read_file(p("a/corpus.xml")), read_file(p("c/corpus.xml")));
  EXPECT_TRUE(fs::exists(p("a/synth_manifest.txt")));
}

TEST_F(CliTest, PrepTrainEvaluateCompare) {
  ASSERT_EQ(run_cli("synth " + p("small.spec") + " --out " + p("s")), 0);
  const auto cfg = " --config " + p("tiny.ini");
  ASSERT_EQ(run_cli("prep " + p("s/corpus.xml") + cfg + " --out " + p("prep")), 0);
  ASSERT_EQ(run_cli("prep " + p("s/corpus.xml") + cfg + " --out " + p("prep2")), 0);
  EXPECT_EQ(read_file(p("prep/run_manifest.ini")), read_file(p("prep2/run_manifest.ini")));
  const auto features = read_file(p("prep/features.txt"));
  EXPECT_LE(std::count(features.begin(), features.end(), '\n'), 61);  // header + K terms

  ASSERT_EQ(run_cli("train-flat " + p("prep")), 0);
  const auto hist = read_file(p("prep/flat_history.tsv"));
  EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 3);  // header + 2 epochs

  write_file(root / "manual.txt", "a 8500/3\na 8520/3\nb 8522/3\n");
  EXPECT_EQ(run_cli("train-hier " + p("prep") + " --partition " + p("manual.txt")), 2);  // group b needs two classes
  write_file(root / "manual.txt", "a 8500/3\nb 8522/3\nb 8520/3\n");
  ASSERT_EQ(run_cli("train-hier " + p("prep") + " --partition " + p("manual.txt")), 0);
  EXPECT_EQ(read_file(p("prep/partition.txt")).find("# manual partition file\na 8500/3\nb 8522/3\nb 8520/3\n"), 0u);
  for (const char* node : {"parent", "binary", "multi"}) {
    const auto h = read_file(p(std::string("prep/hier_") + node + "_history.tsv"));
    EXPECT_EQ(std::count(h.begin(), h.end(), '\n'), 3) << node;
  }

  ASSERT_EQ(run_cli("evaluate " + p("prep")), 0);
  for (const char* f : {"results_flat.tsv", "results_hier.tsv", "routes_hier.tsv", "results_child_multi.tsv",
                        "results_child_binary.tsv"})
    EXPECT_TRUE(fs::exists(p(std::string("prep/") + f))) << f;
  ASSERT_EQ(run_cli("compare " + p("prep")), 0);
  const auto table = read_file(p("prep/comparison.tsv"));
  EXPECT_NE(table.find("Multiclass CNN"), std::string::npos);
  EXPECT_NE(table.find("Hierarchical CNN"), std::string::npos);

  // A results file from differently prepared data is refused.
  ASSERT_EQ(run_cli("prep " + p("s/corpus.xml") + cfg + " --seed 5 --out " + p("other")), 0);
  fs::copy_file(p("prep/flat.tcnn"), p("other/flat.tcnn"));
  EXPECT_NE(run_cli("evaluate " + p("other")), 0);
}

}  // namespace
}  // namespace hcnn
