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

// Verification-only scan for identifier-shaped text left in a report. Nothing
// is redacted; a non-empty result means the report failed the check.

#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "hcnn/corpus.hpp"

namespace hcnn {

enum class FindingCategory { LongDigitRun, DateLike, IdLikeToken, TitlePlusName };

inline std::string_view to_string(FindingCategory c) {
  switch (c) {
    case FindingCategory::LongDigitRun: return "long-digit-run";
    case FindingCategory::DateLike: return "date-like";
    case FindingCategory::IdLikeToken: return "id-like-token";
    case FindingCategory::TitlePlusName: return "title-plus-capitalized-word";
  }
  return "unknown";
}

struct AnonymizationFinding {
  std::string report_id;
  std::size_t start = 0;  // byte offset, inclusive
  std::size_t end = 0;    // byte offset, exclusive
  FindingCategory category = FindingCategory::LongDigitRun;

  bool operator==(const AnonymizationFinding&) const = default;
};

namespace detail {

inline bool is_alnum_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

struct Candidate {
  std::size_t start, end;
  FindingCategory category;
};

inline void regex_candidates(const std::string& text, const std::regex& re, FindingCategory cat,
                             std::vector<Candidate>& out) {
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto pos = static_cast<std::size_t>(m.position(0));
    out.push_back({pos, pos + static_cast<std::size_t>(m.length(0)), cat});
  }
}

}  // namespace detail

/// Returns all non-overlapping matches of the four finding categories:
///   long-digit-run   six or more consecutive digits
///   date-like        DD/DD/DDDD or DDDD-DD-DD
///   id-like-token    alphanumeric token with >= 2 letters and >= 4 digits
///   title-plus-...   dr/mr/mrs/ms (any case, optional '.') then a Capitalized word
/// Overlaps resolve to the earliest start, then the longest span, then the
/// category order above with dates first.
inline std::vector<AnonymizationFinding> verify_anonymized(const PathologyReport& report) {
  static const std::regex digits(R"(\d{6,})");
  static const std::regex date(R"((?:^|[^0-9])(\d{2}/\d{2}/\d{4}|\d{4}-\d{2}-\d{2})(?![0-9]))");
  static const std::regex title(R"((?:^|[^A-Za-z0-9])((?:[Dd][Rr]|[Mm][Rr][Ss]?|[Mm][Ss])\.?\s+[A-Z][a-z]+))");

  const std::string& text = report.text;
  std::vector<detail::Candidate> cands;
  detail::regex_candidates(text, digits, FindingCategory::LongDigitRun, cands);

  // Patterns with a leading context guard report their first capture group.
  auto grouped = [&](const std::regex& re, FindingCategory cat) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
      const auto pos = static_cast<std::size_t>(it->position(1));
      cands.push_back({pos, pos + static_cast<std::size_t>(it->length(1)), cat});
    }
  };
  grouped(date, FindingCategory::DateLike);
  grouped(title, FindingCategory::TitlePlusName);

  for (std::size_t i = 0; i < text.size();) {
    if (!detail::is_alnum_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i, letters = 0, nums = 0;
    for (; j < text.size() && detail::is_alnum_byte(static_cast<unsigned char>(text[j])); ++j)
      (text[j] >= '0' && text[j] <= '9') ? ++nums : ++letters;
    if (letters >= 2 && nums >= 4) cands.push_back({i, j, FindingCategory::IdLikeToken});
    i = j;
  }

  auto rank = [](FindingCategory c) {
    switch (c) {
      case FindingCategory::DateLike: return 0;
      case FindingCategory::IdLikeToken: return 1;
      case FindingCategory::LongDigitRun: return 2;
      case FindingCategory::TitlePlusName: return 3;
    }
    return 4;
  };
  std::sort(cands.begin(), cands.end(), [&](const auto& a, const auto& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end > b.end;
    return rank(a.category) < rank(b.category);
  });

  std::vector<AnonymizationFinding> findings;
  std::size_t covered = 0;
  for (const auto& c : cands) {
    if (!findings.empty() && c.start < covered) continue;
    findings.push_back({report.id, c.start, c.end, c.category});
    covered = c.end;
  }
  return findings;
}

/// One line per finding: `report_id<TAB>category<TAB>start<TAB>end`.
inline void write_findings(const std::vector<AnonymizationFinding>& findings, std::ostream& out) {
  for (const auto& f : findings)
    out << f.report_id << '\t' << to_string(f.category) << '\t' << f.start << '\t' << f.end << '\n';
}

}  // namespace hcnn
