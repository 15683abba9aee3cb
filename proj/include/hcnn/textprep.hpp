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

// Text preparation: tokenization, language filtering, TF-IDF feature
// selection, vocabulary construction and fixed-length encoding.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hcnn/corpus.hpp"
#include "hcnn/error.hpp"
#include "hcnn/hash.hpp"

namespace hcnn {

using StopwordSet = std::unordered_set<std::string>;

/// Stopword file: one lowercase term per line; '#' starts a comment.
inline StopwordSet load_stopwords(std::istream& in) {
  StopwordSet out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (!line.empty()) out.insert(line);
  }
  return out;
}

inline StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword list '" + path + "'");
  return load_stopwords(in);
}

namespace detail {

// Bytes >= 0x80 (UTF-8 sequences) count as word characters so accented words
// such as "pasiënt" stay whole.
inline bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace detail

/// Splits on non-alphanumeric characters, drops tokens containing a digit and
/// lowercases ASCII. No stopword removal.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!detail::is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool has_digit = false;
    for (; j < text.size() && detail::is_word_byte(static_cast<unsigned char>(text[j])); ++j)
      has_digit |= (text[j] >= '0' && text[j] <= '9');
    if (!has_digit) {
      std::string tok(text.substr(i, j - i));
      for (char& c : tok)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

inline std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stopwords) {
  auto words = split_words(text);
  std::erase_if(words, [&](const std::string& w) { return stopwords.count(w) > 0; });
  return words;
}

inline constexpr double kAfrikaansHitThreshold = 0.05;

/// True iff the Afrikaans stopword hit ratio beats the English one and reaches
/// the threshold. Expects split_words() output (stopwords still present).
inline bool is_afrikaans_only(std::span<const std::string> tokens, const StopwordSet& af_stopwords,
                              const StopwordSet& en_stopwords,
                              double threshold = kAfrikaansHitThreshold) {
  if (tokens.empty()) return false;
  std::size_t af = 0, en = 0;
  for (const auto& t : tokens) {
    af += af_stopwords.count(t);
    en += en_stopwords.count(t);
  }
  const double n = static_cast<double>(tokens.size());
  const double af_ratio = static_cast<double>(af) / n;
  const double en_ratio = static_cast<double>(en) / n;
  return af_ratio > en_ratio && af_ratio >= threshold;
}

struct TokenizedReport {
  std::string id;
  std::vector<std::string> tokens;
  MorphologyCode label;
};

/// Document frequencies and corpus-summed tf-idf ranking scores.
///   idf(t)   = ln((1 + N) / (1 + df(t))) + 1
///   score(t) = sum over documents d of count(t, d) * idf(t)
struct TfIdfModel {
  std::size_t doc_count = 0;
  std::map<std::string, std::size_t> doc_freq;
  std::map<std::string, double> corpus_score;

  double idf(const std::string& term) const {
    const auto it = doc_freq.find(term);
    const double df = it == doc_freq.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(doc_count)) / (1.0 + df)) + 1.0;
  }
};

inline TfIdfModel fit_tfidf(std::span<const std::vector<std::string>> docs) {
  const bool any = std::any_of(docs.begin(), docs.end(), [](const auto& d) { return !d.empty(); });
  if (!any) throw EmptyCorpus("fit_tfidf needs at least one non-empty document");

  TfIdfModel model;
  model.doc_count = docs.size();
  std::vector<std::map<std::string, std::size_t>> term_counts(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (const auto& t : docs[i]) ++term_counts[i][t];
    for (const auto& [t, n] : term_counts[i]) ++model.doc_freq[t];
  }
  std::unordered_map<std::string, double> idf;
  for (const auto& [t, df] : model.doc_freq) {
    idf.emplace(t, model.idf(t));
    model.corpus_score.emplace(t, 0.0);
  }
  // Accumulate per document in document order; keeps the summation order
  // identical to a naive term-by-document loop.
  for (const auto& counts : term_counts)
    for (const auto& [t, n] : counts) model.corpus_score[t] += static_cast<double>(n) * idf[t];
  return model;
}

inline TfIdfModel fit_tfidf(std::span<const TokenizedReport> docs) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(docs.size());
  for (const auto& d : docs) tokens.push_back(d.tokens);
  return fit_tfidf(std::span<const std::vector<std::string>>(tokens));
}

inline constexpr std::size_t kDefaultFeatureCount = 1400;

struct FeatureSet {
  std::vector<std::string> terms;  // rank order
  std::size_t k = kDefaultFeatureCount;

  bool operator==(const FeatureSet&) const = default;
};

/// Top-k terms by descending score; ties go to the lexicographically smaller term.
inline FeatureSet select_top_features(const TfIdfModel& model, std::size_t k) {
  if (k == 0) throw InvalidConfig("feature count K must be at least 1");
  std::vector<std::pair<std::string, double>> ranked(model.corpus_score.begin(), model.corpus_score.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  FeatureSet fs;
  fs.k = k;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) fs.terms.push_back(ranked[i].first);
  return fs;
}

inline void write_features(const FeatureSet& fs, std::ostream& out) {
  out << "tfidf-features v1 K=" << fs.k << '\n';
  for (const auto& t : fs.terms) out << t << '\n';
}

inline FeatureSet read_features(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("tfidf-features v1 K=", 0) != 0)
    throw InvalidConfig("feature file lacks the 'tfidf-features v1 K=<K>' header");
  FeatureSet fs;
  try {
    fs.k = std::stoull(header.substr(20));
  } catch (const std::exception&) {
    throw InvalidConfig("feature file header has a malformed K");
  }
  std::string line;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!seen.insert(line).second) throw InvalidConfig("feature file repeats term '" + line + "'");
    fs.terms.push_back(line);
  }
  if (fs.terms.size() > fs.k) throw InvalidConfig("feature file holds more than K terms");
  return fs;
}

inline std::vector<std::string> filter_document(std::span<const std::string> tokens, const FeatureSet& fs) {
  const std::unordered_set<std::string> keep(fs.terms.begin(), fs.terms.end());
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (keep.count(t)) out.push_back(t);
  return out;
}

/// Index 0 is padding, 1 is unknown; the term of rank i maps to i + 2.
class Vocabulary {
 public:
  static constexpr std::int32_t kPadding = 0;
  static constexpr std::int32_t kUnknown = 1;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
    for (std::size_t i = 0; i < terms_.size(); ++i)
      index_.emplace(terms_[i], static_cast<std::int32_t>(i + 2));
  }

  std::int32_t index_of(const std::string& term) const {
    const auto it = index_.find(term);
    return it == index_.end() ? kUnknown : it->second;
  }
  /// Number of real terms V; the embedding table has V + 2 rows.
  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t table_rows() const noexcept { return terms_.size() + 2; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }

  std::uint64_t fingerprint() const {
    Fnv1a64 h;
    for (const auto& t : terms_) {
      h.update(t);
      h.update("\n");
    }
    return h.digest();
  }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::int32_t> index_;
};

inline Vocabulary build_vocabulary(const FeatureSet& fs) { return Vocabulary(fs.terms); }

struct EncodedDocument {
  std::vector<std::int32_t> indices;
  std::size_t label = 0;

  bool operator==(const EncodedDocument&) const = default;
};

inline EncodedDocument encode(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len,
                              std::size_t label = 0) {
  if (max_len == 0) throw InvalidConfig("max_len must be at least 1");
  EncodedDocument doc;
  doc.label = label;
  doc.indices.assign(max_len, Vocabulary::kPadding);
  for (std::size_t i = 0; i < tokens.size() && i < max_len; ++i) doc.indices[i] = vocab.index_of(tokens[i]);
  return doc;
}

/// Nearest-rank percentile (q in (0, 1]) of a list of lengths; 0 when empty.
inline std::size_t percentile_length(std::vector<std::size_t> lengths, double q) {
  if (lengths.empty()) return 0;
  std::sort(lengths.begin(), lengths.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(lengths.size())));
  rank = std::clamp<std::size_t>(rank, 1, lengths.size());
  return lengths[rank - 1];
}

}  // namespace hcnn
