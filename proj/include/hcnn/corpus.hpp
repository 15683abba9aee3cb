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

// Pathology report corpus: ICD-O morphology labels, XML ingestion and class
// selection.
//
// Corpus file schema:
//
//   <reports>
//     <report id="r1">
//       <type>histology</type>          (optional)
//       <text>infiltrating ductal carcinoma ...</text>
//       <label>8500/3</label>
//     </report>
//     ...
//   </reports>

#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "hcnn/error.hpp"

namespace hcnn {

/// ICD-O morphology code `DDDD/D`: four-digit cell type, one-digit behaviour.
struct MorphologyCode {
  int cell_type = 0;
  int behaviour = 0;

  auto operator<=>(const MorphologyCode&) const = default;

  std::string str() const {
    std::string s(6, '0');
    int c = cell_type;
    for (int i = 3; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = static_cast<char>('0' + c % 10);
      c /= 10;
    }
    s[4] = '/';
    s[5] = static_cast<char>('0' + behaviour);
    return s;
  }
};

inline std::ostream& operator<<(std::ostream& os, const MorphologyCode& c) { return os << c.str(); }

inline MorphologyCode parse_morphology_code(std::string_view s) {
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  const bool ok = s.size() == 6 && digit(s[0]) && digit(s[1]) && digit(s[2]) && digit(s[3]) &&
                  s[4] == '/' && digit(s[5]);
  if (!ok) throw MalformedCode("malformed morphology code '" + std::string(s) + "' (expected DDDD/D)");
  MorphologyCode code;
  for (int i = 0; i < 4; ++i) code.cell_type = code.cell_type * 10 + (s[static_cast<std::size_t>(i)] - '0');
  code.behaviour = s[5] - '0';
  if (code.cell_type < 1000)
    throw MalformedCode("morphology cell type out of range in '" + std::string(s) + "'");
  return code;
}

struct PathologyReport {
  std::string id;
  std::string text;
  MorphologyCode label;
  std::string type;  // optional <type>, stored verbatim

  bool operator==(const PathologyReport&) const = default;
};

class LabelledCorpus {
 public:
  LabelledCorpus() = default;

  /// Throws DuplicateId / MissingField when the reports violate corpus invariants.
  explicit LabelledCorpus(std::vector<PathologyReport> reports) : reports_(std::move(reports)) {
    std::unordered_set<std::string> seen;
    for (const auto& r : reports_) {
      if (r.text.empty()) throw MissingField("report '" + r.id + "' has empty text");
      if (!seen.insert(r.id).second) throw DuplicateId("duplicate report id '" + r.id + "'");
      ++class_counts_[r.label];
    }
  }

  const std::vector<PathologyReport>& reports() const noexcept { return reports_; }
  const std::map<MorphologyCode, std::size_t>& class_counts() const noexcept { return class_counts_; }
  std::size_t size() const noexcept { return reports_.size(); }
  bool empty() const noexcept { return reports_.empty(); }

  bool operator==(const LabelledCorpus& o) const { return reports_ == o.reports_; }

 private:
  std::vector<PathologyReport> reports_;
  std::map<MorphologyCode, std::size_t> class_counts_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  std::size_t b = 0, e = s.size();
  while (b < e && ws(s[b])) ++b;
  while (e > b && ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string xml_escape(std::string_view s, bool attribute) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"':
        if (attribute) {
          out += "&quot;";
          break;
        }
        [[fallthrough]];
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Parses a corpus file. Element order is preserved.
inline LabelledCorpus parse_xml_reports(std::istream& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(source, tree, pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw MalformedXml(std::string("malformed XML: ") + e.what());
  }
  if (tree.size() != 1 || tree.begin()->first != "reports")
    throw MalformedXml("expected a single <reports> root element");

  std::vector<PathologyReport> reports;
  for (const auto& [name, node] : tree.begin()->second) {
    if (name == "<xmlattr>") continue;
    if (name != "report") throw MalformedXml("unexpected element <" + name + "> under <reports>");

    PathologyReport r;
    const auto id = node.get_optional<std::string>("<xmlattr>.id");
    if (!id || id->empty()) throw MissingField("<report> #" + std::to_string(reports.size() + 1) + " lacks an id attribute");
    r.id = *id;

    std::optional<std::string> text, label;
    for (const auto& [child, value] : node) {
      if (child == "<xmlattr>") continue;
      if (!value.empty()) {
        for (const auto& grand : value)
          if (grand.first != "<xmlattr>")
            throw MalformedXml("report '" + r.id + "': <" + child + "> must contain text only");
      }
      auto set_once = [&](std::optional<std::string>& slot) {
        if (slot) throw MalformedXml("report '" + r.id + "': repeated <" + child + ">");
        slot = value.data();
      };
      if (child == "text") {
        set_once(text);
      } else if (child == "label") {
        set_once(label);
      } else if (child == "type") {
        r.type = detail::trim(value.data());
      } else {
        throw MalformedXml("report '" + r.id + "': unexpected element <" + child + ">");
      }
    }
    if (!text) throw MissingField("report '" + r.id + "' lacks <text>");
    if (!label) throw MissingField("report '" + r.id + "' lacks <label>");
    r.text = detail::trim(*text);
    if (r.text.empty()) throw MissingField("report '" + r.id + "' has empty <text>");
    r.label = parse_morphology_code(detail::trim(*label));
    reports.push_back(std::move(r));
  }
  return LabelledCorpus(std::move(reports));
}

inline LabelledCorpus parse_xml_reports(std::string_view xml) {
  std::istringstream in{std::string(xml)};
  return parse_xml_reports(in);
}

inline void write_xml_reports(const LabelledCorpus& corpus, std::ostream& out) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<reports>\n";
  for (const auto& r : corpus.reports()) {
    out << "  <report id=\"" << detail::xml_escape(r.id, true) << "\">\n";
    if (!r.type.empty()) out << "    <type>" << detail::xml_escape(r.type, false) << "</type>\n";
    out << "    <text>" << detail::xml_escape(r.text, false) << "</text>\n"
        << "    <label>" << r.label.str() << "</label>\n"
        << "  </report>\n";
  }
  out << "</reports>\n";
}

/// Keeps reports whose class count lies in [min_count, max_count] or whose
/// label is always included. Relative order is preserved.
inline LabelledCorpus select_classes(const LabelledCorpus& corpus, std::size_t min_count,
                                     std::size_t max_count,
                                     const std::set<MorphologyCode>& always_include = {}) {
  if (min_count > max_count) throw InvalidConfig("select_classes: min_count > max_count");
  std::set<MorphologyCode> keep;
  for (const auto& [code, n] : corpus.class_counts())
    if ((n >= min_count && n <= max_count) || always_include.count(code)) keep.insert(code);
  if (keep.empty()) throw EmptySelection("no class has a report count in the selected range");

  std::vector<PathologyReport> out;
  for (const auto& r : corpus.reports())
    if (keep.count(r.label)) out.push_back(r);
  return LabelledCorpus(std::move(out));
}

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

}  // namespace hcnn
