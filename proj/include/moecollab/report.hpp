// Copyright 2026 The moecollab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Static HTML and ANSI renderings. HTML pages are single files with an inline
// style block; nothing is fetched at view time.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "moecollab/caep.hpp"
#include "moecollab/mining.hpp"

namespace moecollab::report {

inline std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt_num(double v, int precision = 4) {
  if (std::isnan(v)) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

/// Evenly spaced hues, one per atom.
inline std::string atom_color(std::size_t atom, std::size_t num_atoms) {
  const double hue = num_atoms ? 360.0 * static_cast<double>(atom) / static_cast<double>(num_atoms) : 0.0;
  char buf[48];
  std::snprintf(buf, sizeof buf, "hsl(%.0f, 70%%, 80%%)", hue);
  return buf;
}

inline std::string expert_set_text(const mining::PatternAtom& a) {
  std::string s = "{";
  for (std::size_t q = 0; q < a.experts.size(); ++q) {
    if (q) s += ", ";
    s += "(" + std::to_string(a.experts[q].layer) + "," + std::to_string(a.experts[q].expert) + ")";
  }
  return s + "}";
}

inline const char* kPageStyle =
    "body{font-family:sans-serif;margin:2em;}table{border-collapse:collapse;margin:1em 0;}"
    "td,th{border:1px solid #999;padding:2px 6px;text-align:right;}th{background:#eee;}"
    ".tok{display:inline-block;margin:1px;padding:1px 4px;border-radius:3px;font-family:monospace;}"
    ".unassigned{background:#fff;border:1px dashed #bbb;}";

/// Token text for sample i, token t; falls back to the token position.
using TokenText = std::vector<std::vector<std::string>>;

inline std::string token_label(const TokenText& text, std::size_t i, std::size_t t) {
  if (i < text.size() && t < text[i].size()) return text[i][t];
  return "t" + std::to_string(t);
}

inline std::string annotation_html(const mining::TokenAnnotation& ann, const TokenText& text = {}) {
  std::ostringstream os;
  const std::size_t na = ann.atoms.size();
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Token annotation, level "
     << ann.level << "</title>\n<style>" << kPageStyle;
  for (std::size_t p = 0; p < na; ++p) os << ".atom-" << p << "{background:" << atom_color(p, na) << ";}";
  os << "</style></head><body>\n<h1>Token annotation, level " << ann.level << "</h1>\n";
  os << "<h2>Atoms</h2>\n<table><tr><th>atom</th><th>experts</th><th>usage</th></tr>\n";
  for (const auto& a : ann.atoms) {
    os << "<tr><td><span class=\"tok atom-" << a.atom_index << "\">" << a.atom_index
       << "</span></td><td>" << html_escape(expert_set_text(a)) << "</td><td>" << fmt_num(a.usage)
       << "</td></tr>\n";
  }
  os << "</table>\n<h2>Samples</h2>\n";
  for (std::size_t i = 0; i < ann.assignments.size(); ++i) {
    os << "<p><b>sample " << i << "</b><br>";
    for (std::size_t t = 0; t < ann.assignments[i].size(); ++t) {
      const int a = ann.assignments[i][t];
      const std::string cls = a == mining::kUnassigned ? "unassigned" : "atom-" + std::to_string(a);
      os << "<span class=\"tok " << cls << "\" title=\"atom " << (a < 0 ? std::string("none") : std::to_string(a))
         << "\">" << html_escape(token_label(text, i, t)) << "</span>";
    }
    os << "</p>\n";
  }
  os << "</body></html>\n";
  return os.str();
}

/// ANSI background colors cycle through the 16-color palette; unassigned
/// tokens are printed without color.
inline std::string annotation_ansi(const mining::TokenAnnotation& ann, const TokenText& text = {}) {
  static constexpr int kCodes[16] = {41, 42, 43, 44, 45, 46, 47, 100, 101, 102, 103, 104, 105, 106, 107, 40};
  std::ostringstream os;
  for (std::size_t i = 0; i < ann.assignments.size(); ++i) {
    os << "sample " << i << ":";
    for (std::size_t t = 0; t < ann.assignments[i].size(); ++t) {
      const int a = ann.assignments[i][t];
      os << ' ';
      if (a == mining::kUnassigned) {
        os << token_label(text, i, t);
      } else {
        os << "\x1b[" << kCodes[static_cast<std::size_t>(a) % 16] << "m" << token_label(text, i, t) << "\x1b[0m";
      }
    }
    os << '\n';
  }
  return os.str();
}

struct ReportInputs {
  std::vector<std::vector<mining::PatternAtom>> atoms_per_level;
  caep::ContributionState contributions;
  std::vector<ExpertId> experts;
  std::optional<caep::PruneMask> mask;
};

inline std::string report_html(const ReportInputs& in) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Expert collaboration report</title>\n"
     << "<style>" << kPageStyle << "</style></head><body>\n<h1>Expert collaboration report</h1>\n";
  for (std::size_t k = 0; k < in.atoms_per_level.size(); ++k) {
    os << "<h2>Level " << k + 1 << " patterns</h2>\n<table><tr><th>atom</th><th>experts</th><th>usage</th></tr>\n";
    for (const auto& a : in.atoms_per_level[k])
      os << "<tr><td>" << a.atom_index << "</td><td>" << html_escape(expert_set_text(a)) << "</td><td>"
         << fmt_num(a.usage) << "</td></tr>\n";
    os << "</table>\n";
  }
  os << "<h2>Pattern usage</h2>\n<table><tr><th>pattern</th><th>R_sum</th></tr>\n";
  for (Eigen::Index p = 0; p < in.contributions.r_sum.size(); ++p)
    os << "<tr><td>" << p + 1 << "</td><td>" << fmt_num(in.contributions.r_sum(p), 6) << "</td></tr>\n";
  os << "</table>\n<h2>Expert contributions</h2>\n<table><tr><th>row</th><th>layer</th><th>expert</th><th>e</th>";
  if (in.mask) os << "<th>kept</th>";
  os << "</tr>\n";
  for (Eigen::Index r = 0; r < in.contributions.e.size(); ++r) {
    const auto& id = in.experts[static_cast<std::size_t>(r)];
    os << "<tr><td>" << r << "</td><td>" << id.layer << "</td><td>" << id.expert << "</td><td>"
       << fmt_num(in.contributions.e(r), 6) << "</td>";
    if (in.mask) os << "<td>" << int(in.mask->mask[static_cast<std::size_t>(r)]) << "</td>";
    os << "</tr>\n";
  }
  os << "</table>\n";
  if (in.mask) {
    os << "<h2>Pruning</h2>\n<p>k1 = " << fmt_num(in.mask->k1) << ", k2 = " << fmt_num(in.mask->k2)
       << ", f = " << fmt_num(in.mask->f, 6) << ", kept " << in.mask->kept.size() << " of " << in.mask->ne
       << " experts; removed patterns:";
    for (auto p : in.mask->trace) os << ' ' << p;
    if (in.mask->fallback_used) os << " (exhaustion fallback applied)";
    os << "</p>\n";
  }
  os << "</body></html>\n";
  return os.str();
}

}  // namespace moecollab::report
