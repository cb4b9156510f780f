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

// JSON forms of configs and analysis outputs. Matrices are stored row-major
// as flat arrays next to their dimensions; non-finite values (undefined
// similarities, thresholds of experts that never fire) are written as null.

#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "moecollab/activation.hpp"
#include "moecollab/caep.hpp"
#include "moecollab/error.hpp"
#include "moecollab/hsdl.hpp"
#include "moecollab/mining.hpp"
#include "moecollab/synthgen.hpp"

namespace moecollab::json_io {

using nlohmann::json;

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json flat(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  return a;
}

inline json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v(i)));
  return a;
}

inline Eigen::MatrixXd unflat(const json& a, std::size_t rows, std::size_t cols, const char* what) {
  require(a.is_array() && a.size() == rows * cols, ErrorCategory::kFormat,
          std::string(what) + " must be a flat array of " + std::to_string(rows * cols) + " numbers");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t q = 0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j, ++q) {
      require(a[q].is_number(), ErrorCategory::kFormat, std::string(what) + " holds a non-number");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[q].get<double>();
    }
  return m;
}

inline json expert_pair(const ExpertId& id) { return json::array({id.layer, id.expert}); }

inline json expert_list(std::span<const ExpertId> ids) {
  json a = json::array();
  for (const auto& id : ids) a.push_back(expert_pair(id));
  return a;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCategory::kConfig, std::string("config field '") + key + "': " + e.what());
  }
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCategory::kIo, "cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    fail(ErrorCategory::kFormat, path.string() + ": " + e.what());
  }
}

inline void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorCategory::kIo, "cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  require(static_cast<bool>(os), ErrorCategory::kIo, "write failed for " + path.string());
}

// --- hsdl -------------------------------------------------------------------

inline json to_json(const hsdl::HsdlConfig& c) {
  return {{"capacities", c.capacities},     {"lambda0", c.lambda0},
          {"lambda1", c.lambda1},           {"lambda2", c.lambda2},
          {"learning_rate", c.learning_rate}, {"max_iters", c.max_iters},
          {"convergence_tol", c.convergence_tol}, {"seed", c.seed}};
}

inline hsdl::HsdlConfig hsdl_config_from_json(const json& j) {
  require(j.is_object(), ErrorCategory::kConfig, "HSDL config must be a JSON object");
  hsdl::HsdlConfig c;
  c.capacities = get_or(j, "capacities", c.capacities);
  c.lambda0 = get_or(j, "lambda0", c.lambda0);
  c.lambda1 = get_or(j, "lambda1", c.lambda1);
  c.lambda2 = get_or(j, "lambda2", c.lambda2);
  c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
  c.max_iters = get_or(j, "max_iters", c.max_iters);
  c.convergence_tol = get_or(j, "convergence_tol", c.convergence_tol);
  c.seed = get_or(j, "seed", c.seed);
  hsdl::validate(c);
  return c;
}

/// Hierarchy plus the expert layout of the matrix it was learned from.
struct HierarchyDoc {
  hsdl::Hierarchy hierarchy;
  std::size_t num_layers = 1;
  std::size_t experts_per_layer = 0;
  std::vector<ExpertId> experts;
};

inline json to_json(const HierarchyDoc& doc) {
  const auto& h = doc.hierarchy;
  json levels = json::array();
  for (const auto& lvl : h.levels) {
    levels.push_back({{"k", lvl.k},
                      {"Np", lvl.d.cols()},
                      {"R_cols", lvl.r.cols()},
                      {"D", flat(lvl.d)},
                      {"R", flat(lvl.r)},
                      {"loss_trace", lvl.loss_trace},
                      {"iterations", lvl.iterations},
                      {"converged", lvl.converged}});
  }
  return {{"format", "moecollab.hierarchy"},
          {"version", 1},
          {"source_dims", {h.num_experts, h.num_samples}},
          {"num_layers", doc.num_layers},
          {"experts_per_layer", doc.experts_per_layer},
          {"experts", expert_list(doc.experts)},
          {"levels", levels}};
}

inline HierarchyDoc hierarchy_from_json(const json& j) {
  require(j.is_object() && j.value("format", "") == "moecollab.hierarchy", ErrorCategory::kFormat,
          "not a hierarchy document");
  HierarchyDoc doc;
  try {
    const auto dims = j.at("source_dims");
    doc.hierarchy.num_experts = dims.at(0).get<std::size_t>();
    doc.hierarchy.num_samples = dims.at(1).get<std::size_t>();
    doc.num_layers = j.at("num_layers").get<std::size_t>();
    doc.experts_per_layer = j.at("experts_per_layer").get<std::size_t>();
    for (const auto& e : j.at("experts"))
      doc.experts.push_back({e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>()});
    std::size_t prev_cols = doc.hierarchy.num_samples;
    std::size_t prev_atoms = 0;
    for (const auto& l : j.at("levels")) {
      hsdl::DictionaryLevel lvl;
      lvl.k = l.at("k").get<std::size_t>();
      require(lvl.k == doc.hierarchy.levels.size() + 1, ErrorCategory::kFormat,
              "level indices must be consecutive from 1");
      const auto np = l.at("Np").get<std::size_t>();
      const auto rcols = l.at("R_cols").get<std::size_t>();
      require(rcols == (lvl.k == 1 ? prev_cols : prev_atoms), ErrorCategory::kFormat,
              "level " + std::to_string(lvl.k) + " coding shape does not chain");
      lvl.d = unflat(l.at("D"), doc.hierarchy.num_experts, np, "D");
      lvl.r = unflat(l.at("R"), np, rcols, "R");
      lvl.loss_trace = l.at("loss_trace").get<std::vector<double>>();
      lvl.iterations = l.value("iterations", std::size_t{0});
      lvl.converged = l.value("converged", false);
      prev_atoms = np;
      doc.hierarchy.levels.push_back(std::move(lvl));
    }
  } catch (const json::exception& e) {
    fail(ErrorCategory::kFormat, std::string("hierarchy document: ") + e.what());
  }
  require(doc.experts.size() == doc.hierarchy.num_experts, ErrorCategory::kFormat,
          "hierarchy needs one expert id per row");
  return doc;
}

// --- synthgen ---------------------------------------------------------------

inline json to_json(const synth::PlantedPattern& p) {
  return {{"experts", p.experts}, {"weights", p.weights}};
}

inline json to_json(const synth::SynthConfig& c) {
  json pats = json::array();
  for (const auto& p : c.patterns) pats.push_back(to_json(p));
  return {{"num_experts", c.num_experts},       {"num_samples", c.num_samples},
          {"num_layers", c.num_layers},         {"patterns", pats},
          {"activation_prob", c.activation_prob}, {"noise_sigma", c.noise_sigma},
          {"gain_min", c.gain_min},             {"gain_max", c.gain_max},
          {"seed", c.seed}};
}

/// Accepts explicit "patterns" or a "random_patterns" block
/// {count, min_size, max_size, weight_min, weight_max} drawn disjointly.
inline synth::SynthConfig synth_config_from_json(const json& j) {
  require(j.is_object(), ErrorCategory::kConfig, "synth config must be a JSON object");
  synth::SynthConfig c;
  c.num_experts = get_or(j, "num_experts", c.num_experts);
  c.num_samples = get_or(j, "num_samples", c.num_samples);
  c.num_layers = get_or(j, "num_layers", c.num_layers);
  c.activation_prob = get_or(j, "activation_prob", c.activation_prob);
  c.noise_sigma = get_or(j, "noise_sigma", c.noise_sigma);
  c.gain_min = get_or(j, "gain_min", c.gain_min);
  c.gain_max = get_or(j, "gain_max", c.gain_max);
  c.seed = get_or(j, "seed", c.seed);
  if (j.contains("patterns")) {
    for (const auto& p : j.at("patterns")) {
      synth::PlantedPattern pat;
      pat.experts = get_or(p, "experts", pat.experts);
      pat.weights = p.contains("weights") ? get_or(p, "weights", pat.weights)
                                          : std::vector<double>(pat.experts.size(), 1.0);
      c.patterns.push_back(std::move(pat));
    }
  }
  if (j.contains("random_patterns")) {
    const auto& rp = j.at("random_patterns");
    c.patterns = synth::disjoint_patterns(
        c.num_experts, get_or(rp, "count", std::size_t{8}), get_or(rp, "min_size", std::size_t{3}),
        get_or(rp, "max_size", std::size_t{5}), get_or(rp, "weight_min", 0.6),
        get_or(rp, "weight_max", 1.0), get_or(rp, "seed", c.seed));
  }
  synth::validate(c);
  return c;
}

inline json ground_truth_json(const synth::SynthConfig& c, const synth::SynthResult& r) {
  json pats = json::array();
  for (const auto& p : c.patterns) pats.push_back(to_json(p));
  return {{"format", "moecollab.ground_truth"},
          {"seed", c.seed},
          {"patterns", pats},
          {"fired", r.fired}};
}

// --- mining -----------------------------------------------------------------

inline json to_json(const mining::PatternAtom& a) {
  return {{"atom", a.atom_index},
          {"rows", a.rows},
          {"experts", expert_list(a.experts)},
          {"weights", a.weights},
          {"usage", a.usage}};
}

inline json atoms_json(std::span<const mining::PatternAtom> atoms) {
  json a = json::array();
  for (const auto& atom : atoms) a.push_back(to_json(atom));
  return a;
}

inline json to_json(const mining::CoactivationTable& t, std::span<const ExpertId> ids = {}) {
  json entries = json::array();
  for (const auto& c : t.entries) {
    json e = {{"experts", std::vector<std::uint32_t>(t.members(c).begin(), t.members(c).end())},
              {"count", c.count},
              {"frequency", c.frequency}};
    if (!ids.empty()) {
      json le = json::array();
      for (auto m : t.members(c)) le.push_back(expert_pair(ids[m]));
      e["layer_expert"] = le;
    }
    entries.push_back(std::move(e));
  }
  return {{"format", "moecollab.coactivation"},
          {"order", t.order},
          {"num_experts", t.num_experts},
          {"num_samples", t.num_samples},
          {"threshold", vec(t.threshold)},
          {"entries", entries}};
}

inline mining::CoactivationTable coactivation_from_json(const json& j) {
  require(j.is_object() && j.value("format", "") == "moecollab.coactivation",
          ErrorCategory::kFormat, "not a co-activation table");
  mining::CoactivationTable t;
  try {
    t.order = j.at("order").get<int>();
    require(t.order == 2 || t.order == 3, ErrorCategory::kFormat, "table order must be 2 or 3");
    t.num_experts = j.at("num_experts").get<std::size_t>();
    t.num_samples = j.at("num_samples").get<std::size_t>();
    const auto& th = j.at("threshold");
    t.threshold.resize(static_cast<Eigen::Index>(th.size()));
    for (std::size_t i = 0; i < th.size(); ++i)
      t.threshold(static_cast<Eigen::Index>(i)) =
          th[i].is_null() ? std::numeric_limits<double>::infinity() : th[i].get<double>();
    for (const auto& e : j.at("entries")) {
      mining::Combination c;
      const auto m = e.at("experts").get<std::vector<std::uint32_t>>();
      require(m.size() == static_cast<std::size_t>(t.order), ErrorCategory::kFormat,
              "combination size does not match the table order");
      std::copy(m.begin(), m.end(), c.members.begin());
      c.count = e.at("count").get<std::size_t>();
      c.frequency = e.at("frequency").get<double>();
      t.entries.push_back(c);
    }
  } catch (const json::exception& e) {
    fail(ErrorCategory::kFormat, std::string("co-activation table: ") + e.what());
  }
  return t;
}

inline json profiles_json(std::span<const mining::DomainProfile> profiles,
                          const Eigen::MatrixXd& similarity) {
  json ps = json::array();
  json names = json::array();
  for (const auto& p : profiles) {
    names.push_back(p.domain);
    ps.push_back({{"domain", p.domain},
                  {"num_samples", p.num_samples},
                  {"activations", p.activations},
                  {"degenerate", p.degenerate},
                  {"frequency", vec(p.frequency)}});
  }
  json sim = json::array();
  for (Eigen::Index a = 0; a < similarity.rows(); ++a) {
    json row = json::array();
    for (Eigen::Index b = 0; b < similarity.cols(); ++b) row.push_back(finite_or_null(similarity(a, b)));
    sim.push_back(row);
  }
  return {{"format", "moecollab.profiles"}, {"domains", names}, {"profiles", ps}, {"similarity", sim}};
}

// --- caep -------------------------------------------------------------------

inline json to_json(const caep::PruneMask& m, std::span<const ExpertId> ids) {
  require(ids.size() == m.ne, ErrorCategory::kShape, "one expert id is required per mask entry");
  json kept_le = json::array();
  for (auto r : m.kept) kept_le.push_back(expert_pair(ids[r]));
  std::vector<int> mask(m.mask.begin(), m.mask.end());
  return {{"ne", m.ne},
          {"k1", m.k1},
          {"k2", m.k2},
          {"f", m.f},
          {"scores", vec(m.initial_scores)},
          {"mask", mask},
          {"kept", m.kept},
          {"kept_layer_expert", kept_le},
          {"trace", m.trace},
          {"fallback_used", m.fallback_used}};
}

}  // namespace moecollab::json_io
