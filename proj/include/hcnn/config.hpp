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

// Run configuration: an INI file with sections
//
//   [prep]    feature count, class-selection bounds, split, stopword lists
//   [cnn]     defaults shared by every node model
//   [flat] [parent] [binary] [multi]   per-node overrides of [cnn]
//   [eval]    folds, bootstrap, macro convention, routing fallback
//
// Any [artifacts] section (written into run manifests) is ignored on input, so
// a run manifest is itself a valid config.

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hcnn/corpus.hpp"
#include "hcnn/error.hpp"
#include "hcnn/metrics.hpp"
#include "hcnn/splits.hpp"
#include "hcnn/textcnn.hpp"
#include "hcnn/textprep.hpp"

#ifndef HCNN_DATA_DIR
#define HCNN_DATA_DIR "data"
#endif

namespace hcnn {

struct PrepConfig {
  std::size_t tfidf_k = kDefaultFeatureCount;
  std::size_t min_class_count = 12;
  std::size_t max_class_count = 111;
  std::set<MorphologyCode> always_include{MorphologyCode{8500, 3}};
  SplitFractions split;
  std::uint64_t split_seed = 1;
  std::size_t max_len = 0;  // 0: percentile of training lengths
  double max_len_percentile = 0.95;
  std::string en_stopwords = std::string(HCNN_DATA_DIR) + "/stopwords_en.txt";
  std::string af_stopwords = std::string(HCNN_DATA_DIR) + "/stopwords_af.txt";
  double afrikaans_threshold = kAfrikaansHitThreshold;
};

struct EvalConfig {
  std::size_t folds = 10;
  std::uint64_t fold_seed = 1;
  std::size_t bootstrap_resamples = kDefaultBootstrapResamples;
  double alpha = 0.05;
  std::uint64_t bootstrap_seed = 1;
  MacroAverage macro = MacroAverage::AllClasses;
  bool fallback = true;
};

struct RunConfig {
  PrepConfig prep;
  TextCnnConfig flat, parent, binary, multi;
  EvalConfig eval;

  RunConfig() {
    parent.seed = 2;
    binary.seed = 3;
    multi.seed = 4;
  }

  /// Reseeds every random stream: split, folds, bootstrap and the four nodes
  /// (seed, seed+1, seed+2, seed+3).
  void reseed(std::uint64_t seed) {
    prep.split_seed = eval.fold_seed = eval.bootstrap_seed = seed;
    flat.seed = seed;
    parent.seed = seed + 1;
    binary.seed = seed + 2;
    multi.seed = seed + 3;
  }

  template <class F>
  void for_each_node(F&& f) {
    f(flat);
    f(parent);
    f(binary);
    f(multi);
  }
};

namespace detail {

namespace pt = boost::property_tree;

// Shortest text that reads back to the same double.
inline std::string fmt_real(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_value(const std::string& key, const std::string& raw) {
  std::istringstream in(raw);
  T v{};
  if (!(in >> v) || !(in >> std::ws).eof()) throw InvalidConfig("config key '" + key + "' has malformed value '" + raw + "'");
  return v;
}

inline std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& raw) {
  std::vector<std::size_t> out;
  std::istringstream in(raw);
  for (std::string item; std::getline(in, item, ',');) out.push_back(parse_value<std::size_t>(key, trim(item)));
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw InvalidConfig("config key '" + key + "' expects true/false, got '" + raw + "'");
}

inline void apply_cnn_section(const pt::ptree& sec, const std::string& name, TextCnnConfig& c) {
  for (const auto& [key, node] : sec) {
    const auto v = trim(node.data());
    const auto full = name + "." + key;
    if (key == "window_sizes") c.window_sizes = parse_sizes(full, v);
    else if (key == "maps_per_window") c.maps_per_window = parse_value<std::size_t>(full, v);
    else if (key == "embedding_dim") c.embedding_dim = parse_value<std::size_t>(full, v);
    else if (key == "dropout_rate") c.dropout_rate = parse_value<double>(full, v);
    else if (key == "hidden_size") c.hidden_size = parse_value<std::size_t>(full, v);
    else if (key == "epochs") c.epochs = parse_value<std::size_t>(full, v);
    else if (key == "batch_size") c.batch_size = parse_value<std::size_t>(full, v);
    else if (key == "adadelta_rho") c.adadelta_rho = parse_value<double>(full, v);
    else if (key == "adadelta_eps") c.adadelta_eps = parse_value<double>(full, v);
    else if (key == "seed") c.seed = parse_value<std::uint64_t>(full, v);
    else throw InvalidConfig("unknown config key '" + full + "'");
  }
}

inline void write_cnn_section(std::ostream& out, const std::string& name, const TextCnnConfig& c) {
  out << '[' << name << "]\n";
  out << "window_sizes = ";
  for (std::size_t i = 0; i < c.window_sizes.size(); ++i) out << (i ? "," : "") << c.window_sizes[i];
  out << "\nmaps_per_window = " << c.maps_per_window << "\nembedding_dim = " << c.embedding_dim
      << "\ndropout_rate = " << fmt_real(c.dropout_rate) << "\nhidden_size = " << c.hidden_size
      << "\nepochs = " << c.epochs << "\nbatch_size = " << c.batch_size << "\nadadelta_rho = " << fmt_real(c.adadelta_rho)
      << "\nadadelta_eps = " << fmt_real(c.adadelta_eps) << "\nseed = " << c.seed << "\n\n";
}

}  // namespace detail

inline RunConfig read_run_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, sec] : tree) {
    if (!sec.data().empty() && sec.empty()) throw InvalidConfig("config key '" + section + "' outside any section");
  }
  if (auto cnn = tree.get_child_optional("cnn")) {
    TextCnnConfig base;
    detail::apply_cnn_section(*cnn, "cnn", base);
    const auto seeds = std::vector<std::uint64_t>{cfg.flat.seed, cfg.parent.seed, cfg.binary.seed, cfg.multi.seed};
    cfg.flat = cfg.parent = cfg.binary = cfg.multi = base;
    if (!cnn->get_child_optional("seed")) {
      cfg.flat.seed = seeds[0];
      cfg.parent.seed = seeds[1];
      cfg.binary.seed = seeds[2];
      cfg.multi.seed = seeds[3];
    }
  }
  for (const auto& [section, sec] : tree) {
    if (section == "cnn" || section == "artifacts") continue;
    if (section == "flat") detail::apply_cnn_section(sec, section, cfg.flat);
    else if (section == "parent") detail::apply_cnn_section(sec, section, cfg.parent);
    else if (section == "binary") detail::apply_cnn_section(sec, section, cfg.binary);
    else if (section == "multi") detail::apply_cnn_section(sec, section, cfg.multi);
    else if (section == "prep") {
      auto& p = cfg.prep;
      for (const auto& [key, node] : sec) {
        const auto v = detail::trim(node.data());
        const auto full = "prep." + key;
        if (key == "tfidf_k") p.tfidf_k = detail::parse_value<std::size_t>(full, v);
        else if (key == "min_class_count") p.min_class_count = detail::parse_value<std::size_t>(full, v);
        else if (key == "max_class_count") p.max_class_count = v == "inf" ? kUnbounded : detail::parse_value<std::size_t>(full, v);
        else if (key == "always_include") {
          p.always_include.clear();
          std::istringstream list(v);
          for (std::string item; std::getline(list, item, ',');)
            if (!detail::trim(item).empty()) p.always_include.insert(parse_morphology_code(detail::trim(item)));
        } else if (key == "split") {
          std::vector<double> f;
          std::istringstream list(v);
          for (std::string item; std::getline(list, item, ',');) f.push_back(detail::parse_value<double>(full, detail::trim(item)));
          if (f.size() != 3) throw InvalidConfig("prep.split expects three fractions");
          p.split = {f[0], f[1], f[2]};
        } else if (key == "split_seed") p.split_seed = detail::parse_value<std::uint64_t>(full, v);
        else if (key == "max_len") p.max_len = detail::parse_value<std::size_t>(full, v);
        else if (key == "max_len_percentile") p.max_len_percentile = detail::parse_value<double>(full, v);
        else if (key == "en_stopwords") p.en_stopwords = v;
        else if (key == "af_stopwords") p.af_stopwords = v;
        else if (key == "afrikaans_threshold") p.afrikaans_threshold = detail::parse_value<double>(full, v);
        else throw InvalidConfig("unknown config key '" + full + "'");
      }
    } else if (section == "eval") {
      auto& e = cfg.eval;
      for (const auto& [key, node] : sec) {
        const auto v = detail::trim(node.data());
        const auto full = "eval." + key;
        if (key == "folds") e.folds = detail::parse_value<std::size_t>(full, v);
        else if (key == "fold_seed") e.fold_seed = detail::parse_value<std::uint64_t>(full, v);
        else if (key == "bootstrap_resamples") e.bootstrap_resamples = detail::parse_value<std::size_t>(full, v);
        else if (key == "alpha") e.alpha = detail::parse_value<double>(full, v);
        else if (key == "bootstrap_seed") e.bootstrap_seed = detail::parse_value<std::uint64_t>(full, v);
        else if (key == "macro_average") {
          if (v == "all") e.macro = MacroAverage::AllClasses;
          else if (v == "present") e.macro = MacroAverage::PresentClasses;
          else throw InvalidConfig("eval.macro_average expects 'all' or 'present'");
        } else if (key == "fallback") e.fallback = detail::parse_bool(full, v);
        else throw InvalidConfig("unknown config key '" + full + "'");
      }
    } else {
      throw InvalidConfig("unknown config section [" + section + "]");
    }
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return read_run_config(in);
}

/// Fully resolved config; read_run_config(write_run_config(c)) == c.
inline void write_run_config(const RunConfig& c, std::ostream& out) {
  const auto& p = c.prep;
  out << "[prep]\ntfidf_k = " << p.tfidf_k << "\nmin_class_count = " << p.min_class_count << "\nmax_class_count = ";
  if (p.max_class_count == kUnbounded) out << "inf";
  else out << p.max_class_count;
  out << "\nalways_include = ";
  std::size_t i = 0;
  for (const auto& code : p.always_include) out << (i++ ? "," : "") << code.str();
  out << "\nsplit = " << detail::fmt_real(p.split.train) << ',' << detail::fmt_real(p.split.val) << ','
      << detail::fmt_real(p.split.test) << "\nsplit_seed = " << p.split_seed << "\nmax_len = " << p.max_len
      << "\nmax_len_percentile = " << detail::fmt_real(p.max_len_percentile) << "\nen_stopwords = " << p.en_stopwords
      << "\naf_stopwords = " << p.af_stopwords << "\nafrikaans_threshold = " << detail::fmt_real(p.afrikaans_threshold)
      << "\n\n";
  detail::write_cnn_section(out, "flat", c.flat);
  detail::write_cnn_section(out, "parent", c.parent);
  detail::write_cnn_section(out, "binary", c.binary);
  detail::write_cnn_section(out, "multi", c.multi);
  const auto& e = c.eval;
  out << "[eval]\nfolds = " << e.folds << "\nfold_seed = " << e.fold_seed << "\nbootstrap_resamples = "
      << e.bootstrap_resamples << "\nalpha = " << detail::fmt_real(e.alpha) << "\nbootstrap_seed = " << e.bootstrap_seed
      << "\nmacro_average = " << (e.macro == MacroAverage::AllClasses ? "all" : "present")
      << "\nfallback = " << (e.fallback ? "true" : "false") << "\n";
}

}  // namespace hcnn
