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

// Deterministic synthetic report corpora with controllable class imbalance and
// keyword overlap between classes.
//
// Every token is a pronounceable nonsense word (consonant-vowel syllables over
// an alphabet without 'e'), so no real clinical text, stopword or identifier
// shape can appear. A report is `length` tokens; each slot is a class-keyword
// slot with probability keyword_injection_rate (at least one per report), and
// a keyword slot borrows a keyword from a uniformly chosen other class with
// probability overlap_rate. Remaining slots draw from the shared background
// vocabulary.

#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hcnn/corpus.hpp"
#include "hcnn/error.hpp"
#include "hcnn/rng.hpp"

namespace hcnn {

struct SynthSpec {
  std::vector<std::pair<MorphologyCode, std::size_t>> classes;
  std::size_t shared_vocab_size = 300;
  std::size_t per_class_keyword_count = 12;
  double keyword_injection_rate = 0.25;
  std::size_t doc_length_min = 20;
  std::size_t doc_length_max = 40;
  double overlap_rate = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw InvalidSpec("synth spec: " + m); };
    if (classes.empty()) fail("no classes");
    std::set<MorphologyCode> seen;
    for (const auto& [code, n] : classes) {
      if (n == 0) fail("class " + code.str() + " has count 0");
      if (!seen.insert(code).second) fail("class " + code.str() + " listed twice");
    }
    if (shared_vocab_size == 0) fail("shared_vocab_size must be positive");
    if (per_class_keyword_count == 0) fail("per_class_keyword_count must be positive");
    if (!(keyword_injection_rate > 0.0 && keyword_injection_rate <= 1.0)) fail("keyword_injection_rate must lie in (0, 1]");
    if (!(overlap_rate >= 0.0 && overlap_rate <= 1.0)) fail("overlap_rate must lie in [0, 1]");
    if (doc_length_min < 5) fail("doc_length_min must be at least 5 (widest convolution window)");
    if (doc_length_max < doc_length_min) fail("doc_length_max below doc_length_min");
  }
};

/// The class counts [1417, 111, 80, 60, 45, 30, 20, 15, 12]: one dominant
/// class holding ~79% of reports, the rest within 12..111.
inline SynthSpec registry_shaped_spec(double overlap_rate, std::uint64_t seed) {
  SynthSpec s;
  const std::vector<std::pair<const char*, std::size_t>> counts{
      {"8500/3", 1417}, {"8520/3", 111}, {"8522/3", 80}, {"8480/3", 60}, {"8211/3", 45},
      {"8201/3", 30},   {"8507/3", 20},  {"8575/3", 15}, {"8010/3", 12}};
  for (const auto& [code, n] : counts) s.classes.emplace_back(parse_morphology_code(code), n);
  s.overlap_rate = overlap_rate;
  s.seed = seed;
  return s;
}

struct InjectedKeyword {
  std::string keyword;
  MorphologyCode source;  // class whose keyword list it came from
};

struct SynthManifest {
  SynthSpec spec;
  std::map<MorphologyCode, std::vector<std::string>> keywords;
  std::vector<std::string> background;
  std::map<std::string, std::vector<InjectedKeyword>> provenance;  // report id -> injected keywords
};

struct SynthCorpus {
  LabelledCorpus corpus;
  SynthManifest manifest;
};

namespace detail {

inline std::string pronounceable_word(Rng& rng, std::size_t syllables) {
  static constexpr char kConsonants[] = "bdfgklmnprstvz";
  static constexpr char kVowels[] = "aiou";
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += kConsonants[rng.below(sizeof(kConsonants) - 1)];
    w += kVowels[rng.below(sizeof(kVowels) - 1)];
  }
  return w;
}

}  // namespace detail

inline SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SynthCorpus out;
  auto& man = out.manifest;
  man.spec = spec;

  std::set<std::string> used;
  auto fresh = [&](std::size_t syllables) {
    while (true) {
      auto w = detail::pronounceable_word(rng, syllables);
      if (used.insert(w).second) return w;
    }
  };
  for (std::size_t i = 0; i < spec.shared_vocab_size; ++i) man.background.push_back(fresh(3));
  std::vector<MorphologyCode> codes;
  for (const auto& [code, n] : spec.classes) {
    codes.push_back(code);
    auto& kws = man.keywords[code];
    for (std::size_t i = 0; i < spec.per_class_keyword_count; ++i) kws.push_back(fresh(4));
  }

  // Labels in spec order, then shuffled so classes interleave.
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) labels.insert(labels.end(), spec.classes[c].second, c);
  rng.shuffle(labels);

  std::vector<PathologyReport> reports;
  reports.reserve(labels.size());
  const std::size_t width = std::to_string(labels.size()).size();
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const std::size_t cls = labels[r];
    const auto len = spec.doc_length_min + static_cast<std::size_t>(rng.below(spec.doc_length_max - spec.doc_length_min + 1));
    std::vector<bool> keyword_slot(len);
    for (std::size_t i = 0; i < len; ++i) keyword_slot[i] = rng.bernoulli(spec.keyword_injection_rate);
    if (std::none_of(keyword_slot.begin(), keyword_slot.end(), [](bool b) { return b; }))
      keyword_slot[static_cast<std::size_t>(rng.below(len))] = true;

    std::string id = std::to_string(r + 1);
    id = "syn-" + std::string(width - id.size(), '0') + id;
    std::vector<InjectedKeyword> injected;
    std::string text;
    for (std::size_t i = 0; i < len; ++i) {
      std::string word;
      if (keyword_slot[i]) {
        std::size_t source = cls;
        if (codes.size() > 1 && rng.bernoulli(spec.overlap_rate)) {
          source = static_cast<std::size_t>(rng.below(codes.size() - 1));
          if (source >= cls) ++source;
        }
        const auto& kws = man.keywords[codes[source]];
        word = kws[static_cast<std::size_t>(rng.below(kws.size()))];
        injected.push_back({word, codes[source]});
      } else {
        word = man.background[static_cast<std::size_t>(rng.below(man.background.size()))];
      }
      text += (i ? " " : "") + word;
    }
    man.provenance[id] = std::move(injected);
    reports.push_back({id, std::move(text), codes[cls], "synthetic"});
  }
  out.corpus = LabelledCorpus(std::move(reports));
  return out;
}

// Spec file: key=value lines.
//   classes = 8500/3:1417, 8520/3:111, ...
//   shared_vocab_size, per_class_keyword_count, keyword_injection_rate,
//   doc_length_min, doc_length_max, overlap_rate, seed
inline SynthSpec read_synth_spec(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidSpec(std::string("synth spec: ") + e.what());
  }
  SynthSpec s;
  try {
    const auto classes = tree.get<std::string>("classes");
    std::istringstream list(classes);
    for (std::string item; std::getline(list, item, ',');) {
      item = detail::trim(item);
      if (item.empty()) continue;
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw InvalidSpec("synth spec: class entry '" + item + "' lacks ':<count>'");
      s.classes.emplace_back(parse_morphology_code(detail::trim(item.substr(0, colon))),
                             std::stoull(item.substr(colon + 1)));
    }
    auto opt = [&](const char* key, auto& field) {
      if (const auto v = tree.get_child_optional(key)) field = v->get_value<std::remove_reference_t<decltype(field)>>();
    };
    opt("shared_vocab_size", s.shared_vocab_size);
    opt("per_class_keyword_count", s.per_class_keyword_count);
    opt("keyword_injection_rate", s.keyword_injection_rate);
    opt("doc_length_min", s.doc_length_min);
    opt("doc_length_max", s.doc_length_max);
    opt("overlap_rate", s.overlap_rate);
    opt("seed", s.seed);
  } catch (const pt::ptree_error& e) {
    throw InvalidSpec(std::string("synth spec: ") + e.what());
  } catch (const MalformedCode& e) {
    throw InvalidSpec(std::string("synth spec: ") + e.what());
  } catch (const std::logic_error&) {
    throw InvalidSpec("synth spec: malformed class count");
  }
  s.validate();
  return s;
}

inline void write_synth_spec(const SynthSpec& s, std::ostream& out) {
  out << "classes = ";
  for (std::size_t i = 0; i < s.classes.size(); ++i)
    out << (i ? ", " : "") << s.classes[i].first.str() << ':' << s.classes[i].second;
  out << "\nshared_vocab_size = " << s.shared_vocab_size << "\nper_class_keyword_count = " << s.per_class_keyword_count
      << "\nkeyword_injection_rate = " << s.keyword_injection_rate << "\ndoc_length_min = " << s.doc_length_min
      << "\ndoc_length_max = " << s.doc_length_max << "\noverlap_rate = " << s.overlap_rate << "\nseed = " << s.seed
      << '\n';
}

/// Manifest: `synth-manifest v1`, then [spec] (key = value), [background],
/// [keywords] (`label<TAB>kw kw ...`) and [provenance]
/// (`report_id<TAB>kw@label kw@label ...`).
inline void write_manifest(const SynthManifest& m, std::ostream& out) {
  out << "synth-manifest v1\n[spec]\n";
  write_synth_spec(m.spec, out);
  out << "[background]\n";
  for (std::size_t i = 0; i < m.background.size(); ++i) out << (i ? " " : "") << m.background[i];
  out << "\n[keywords]\n";
  for (const auto& [code, kws] : m.keywords) {
    out << code.str() << '\t';
    for (std::size_t i = 0; i < kws.size(); ++i) out << (i ? " " : "") << kws[i];
    out << '\n';
  }
  out << "[provenance]\n";
  for (const auto& [id, inj] : m.provenance) {
    out << id << '\t';
    for (std::size_t i = 0; i < inj.size(); ++i) out << (i ? " " : "") << inj[i].keyword << '@' << inj[i].source.str();
    out << '\n';
  }
}

}  // namespace hcnn
