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

// moecollab: command-line front end.
//
//   synth     generate a planted-pattern activation matrix (MOEACT + ground truth)
//   learn     fit a dictionary hierarchy to an activation file
//   mine      exhaustive pair/triplet co-activation table
//   coverage  top-k% coverage of learned atoms against a co-activation table
//   profiles  per-domain activation profiles and their cosine similarities
//   prune     contribution-aware pruning mask from a learned level
//   annotate  per-token atom assignment (HTML + ANSI)
//   report    contribution table and patterns (HTML + JSON)
//
// Failures exit nonzero and print "error[<category>]: <message>" on stderr.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "moecollab/activation.hpp"
#include "moecollab/caep.hpp"
#include "moecollab/error.hpp"
#include "moecollab/hsdl.hpp"
#include "moecollab/json_io.hpp"
#include "moecollab/manifest.hpp"
#include "moecollab/metrics.hpp"
#include "moecollab/mining.hpp"
#include "moecollab/moeact_io.hpp"
#include "moecollab/report.hpp"
#include "moecollab/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace moecollab;

namespace {

struct Options {
  std::string input;
  std::string labels;
  std::string config;
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> levels;
  std::string np;
  std::optional<double> lambda0, lambda1, lambda2;
  std::optional<std::size_t> max_iters;
  double tau = 0.5;
  std::optional<double> theta;
  double k1 = 0.5;
  double k2 = 0.5;
  std::optional<double> report_k1, report_k2;
  int order = 2;
  double top_percent = 10.0;
  std::size_t level = 1;
  bool normalize = false;
  std::string table;
  std::string hierarchy;
  std::string tokens;
  double cap = mining::kDefaultCombinationCap;
};

fs::path out_path(const Options& o, const std::string& name) { return fs::path(o.output_dir) / name; }

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::trunc | std::ios::binary);
  require(static_cast<bool>(os), ErrorCategory::kIo, "cannot open " + p.string() + " for writing");
  os << s;
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      require(used == item.size() && v >= 1, ErrorCategory::kConfig, "bad --np entry '" + item + "'");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      fail(ErrorCategory::kConfig, "bad --np entry '" + item + "'");
    }
  }
  return out;
}

/// Reads a MOEACT file as X, aggregating token files first.
ExpertActivationMatrix load_matrix(const std::string& path, bool normalize) {
  auto t = moeact::read(path);
  if (t.is_token()) t = aggregate_tokens(t);
  return flatten_to_matrix(t, normalize);
}

mining::ActivationThreshold threshold_for(const Options& o, const Eigen::MatrixXd& x) {
  if (o.theta) return mining::ActivationThreshold::uniform(static_cast<std::size_t>(x.rows()), *o.theta);
  return mining::percentile_threshold(x);
}

json threshold_config(const Options& o) {
  return o.theta ? json(*o.theta) : json("per-expert 75th percentile of nonzero values");
}

void run_synth(const Options& o, RunManifest& m) {
  synth::SynthConfig c;
  if (!o.config.empty()) {
    m.inputs.push_back(digest_file(o.config));
    c = json_io::synth_config_from_json(json_io::read_json(o.config));
  } else {
    c.num_experts = 64;
    c.num_samples = 500;
    c.activation_prob = 0.3;
    c.noise_sigma = 0.05;
  }
  if (o.seed) c.seed = *o.seed;
  if (o.config.empty()) c.patterns = synth::disjoint_patterns(c.num_experts, 8, 3, 5, 0.6, 1.0, c.seed);
  const auto res = synth::generate(c);
  moeact::write(moeact::tensor_from_matrix(res.x), out_path(o, "activations.moeact"));
  json_io::write_json(json_io::ground_truth_json(c, res), out_path(o, "ground_truth.json"));
  m.config = json_io::to_json(c);
  m.seed = c.seed;
  m.outputs = {"activations.moeact", "ground_truth.json"};
}

void run_learn(const Options& o, RunManifest& m) {
  m.inputs.push_back(digest_file(o.input));
  hsdl::HsdlConfig c;
  if (!o.config.empty()) {
    m.inputs.push_back(digest_file(o.config));
    c = json_io::hsdl_config_from_json(json_io::read_json(o.config));
  }
  if (!o.np.empty()) c.capacities = parse_list(o.np);
  if (o.levels) {
    require(*o.levels >= 1, ErrorCategory::kConfig, "--levels must be >= 1");
    if (c.capacities.size() == 1) {
      // Capacities double per level.
      for (std::size_t k = 1; k < *o.levels; ++k) c.capacities.push_back(c.capacities.back() * 2);
    }
    require(c.capacities.size() == *o.levels, ErrorCategory::kConfig,
            "--levels disagrees with the number of capacities");
  }
  if (o.lambda0) c.lambda0 = *o.lambda0;
  if (o.lambda1) c.lambda1 = *o.lambda1;
  if (o.lambda2) c.lambda2 = *o.lambda2;
  if (o.max_iters) c.max_iters = *o.max_iters;
  if (o.seed) c.seed = *o.seed;
  hsdl::validate(c);

  const auto x = load_matrix(o.input, o.normalize);
  json_io::HierarchyDoc doc;
  doc.hierarchy = hsdl::fit_hierarchy(x.data(), c);
  doc.num_layers = x.num_layers();
  doc.experts_per_layer = x.experts_per_layer();
  doc.experts.assign(x.row_ids().begin(), x.row_ids().end());
  json_io::write_json(json_io::to_json(doc), out_path(o, "hierarchy.json"));
  m.config = json_io::to_json(c);
  m.config["normalize"] = o.normalize;
  m.seed = c.seed;
  m.outputs = {"hierarchy.json"};
}

void run_mine(const Options& o, RunManifest& m) {
  m.inputs.push_back(digest_file(o.input));
  const auto x = load_matrix(o.input, o.normalize);
  const auto table = mining::exhaustive_coactivation(x.data(), threshold_for(o, x.data()), o.order, o.cap);
  json_io::write_json(json_io::to_json(table, x.row_ids()), out_path(o, "coactivation.json"));
  m.config = {{"order", o.order}, {"theta", threshold_config(o)}, {"cap", o.cap}, {"normalize", o.normalize}};
  m.outputs = {"coactivation.json"};
}

void run_coverage(const Options& o, RunManifest& m) {
  m.inputs.push_back(digest_file(o.input));
  m.inputs.push_back(digest_file(o.table));
  const auto doc = json_io::hierarchy_from_json(json_io::read_json(o.input));
  const auto table = json_io::coactivation_from_json(json_io::read_json(o.table));
  require(table.num_experts == doc.hierarchy.num_experts, ErrorCategory::kShape,
          "table and hierarchy disagree on the number of experts");
  const auto atoms = mining::binarize_atoms(doc.hierarchy.level(o.level), o.tau, doc.experts);
  const double cov = mining::coverage(atoms, table, o.top_percent);
  json per_atom = json::array();
  for (const auto& a : atoms) {
    const std::vector<mining::PatternAtom> one{a};
    json j = json_io::to_json(a);
    j["covered"] = mining::coverage(one, table, o.top_percent) > 0.0;
    per_atom.push_back(std::move(j));
  }
  const auto n_top = static_cast<std::size_t>(std::llround(cov * static_cast<double>(atoms.size())));
  json_io::write_json({{"format", "moecollab.coverage"},
                       {"level", o.level},
                       {"tau", o.tau},
                       {"top_percent", o.top_percent},
                       {"order", table.order},
                       {"top_combinations", table.top(o.top_percent).size()},
                       {"n_top", n_top},
                       {"n_total", atoms.size()},
                       {"coverage", cov},
                       {"atoms", per_atom}},
                      out_path(o, "coverage.json"));
  m.config = {{"level", o.level}, {"tau", o.tau}, {"top_percent", o.top_percent}};
  m.outputs = {"coverage.json"};
}

void run_profiles(const Options& o, RunManifest& m) {
  m.inputs.push_back(digest_file(o.input));
  m.inputs.push_back(digest_file(o.labels));
  const auto x = load_matrix(o.input, o.normalize);
  const auto labels = moeact::read_labels(o.labels);
  const auto profiles = mining::domain_profiles(x.data(), labels, threshold_for(o, x.data()));
  const auto sim = mining::similarity_matrix(std::span<const mining::DomainProfile>(profiles));
  json_io::write_json(json_io::profiles_json(profiles, sim), out_path(o, "profiles.json"));
  m.config = {{"theta", threshold_config(o)}, {"normalize", o.normalize}};
  m.outputs = {"profiles.json"};
}

void run_prune(const Options& o, RunManifest& m) {
  m.inputs.push_back(digest_file(o.input));
  const auto doc = json_io::hierarchy_from_json(json_io::read_json(o.input));
  const auto& lvl = doc.hierarchy.level(o.level);
  const auto mask = caep::prune(lvl.d, lvl.r, o.k1, o.k2);
  auto j = json_io::to_json(mask, doc.experts);
  j["format"] = "moecollab.mask";
  j["level"] = o.level;
  j["pruned_fraction"] = 1.0 - static_cast<double>(mask.kept.size()) / static_cast<double>(mask.ne);
  json_io::write_json(j, out_path(o, "mask.json"));
  m.config = {{"level", o.level}, {"k1", o.k1}, {"k2", o.k2}};
  m.outputs = {"mask.json"};
}

report::TokenText read_token_text(const std::string& path) {
  report::TokenText text;
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCategory::kIo, "cannot open " + path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
      const auto i = j.at("sample").get<std::size_t>();
      if (i >= text.size()) text.resize(i + 1);
      text[i] = j.at("tokens").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      fail(ErrorCategory::kFormat, path + ": " + e.what());
    }
  }
  return text;
}

void run_annotate(const Options& o, RunManifest& m) {
  m.inputs.push_back(digest_file(o.input));
  m.inputs.push_back(digest_file(o.hierarchy));
  const auto tokens = moeact::read(o.input);
  const auto doc = json_io::hierarchy_from_json(json_io::read_json(o.hierarchy));
  const auto ann = mining::annotate_tokens(tokens, doc.hierarchy, o.level, o.tau);
  report::TokenText text;
  if (!o.tokens.empty()) {
    m.inputs.push_back(digest_file(o.tokens));
    text = read_token_text(o.tokens);
  }
  write_text(out_path(o, "annotation.html"), report::annotation_html(ann, text));
  write_text(out_path(o, "annotation.txt"), report::annotation_ansi(ann, text));
  json_io::write_json({{"format", "moecollab.annotation"},
                       {"level", ann.level},
                       {"tau", o.tau},
                       {"unassigned", mining::kUnassigned},
                       {"assignments", ann.assignments},
                       {"atoms", json_io::atoms_json(ann.atoms)}},
                      out_path(o, "annotation.json"));
  m.config = {{"level", o.level}, {"tau", o.tau}};
  m.outputs = {"annotation.html", "annotation.txt", "annotation.json"};
}

void run_report(const Options& o, RunManifest& m) {
  m.inputs.push_back(digest_file(o.input));
  const auto doc = json_io::hierarchy_from_json(json_io::read_json(o.input));
  const auto& lvl = doc.hierarchy.level(o.level);
  report::ReportInputs in;
  for (const auto& l : doc.hierarchy.levels)
    in.atoms_per_level.push_back(mining::binarize_atoms(l, o.tau, doc.experts));
  in.contributions = caep::contribution_scores(lvl.d, lvl.r);
  in.experts = doc.experts;
  json j = {{"format", "moecollab.report"},
            {"level", o.level},
            {"tau", o.tau},
            {"r_sum", json_io::vec(in.contributions.r_sum)},
            {"e", json_io::vec(in.contributions.e)},
            {"experts", json_io::expert_list(doc.experts)}};
  json levels = json::array();
  for (const auto& atoms : in.atoms_per_level) levels.push_back(json_io::atoms_json(atoms));
  j["atoms"] = levels;
  if (o.report_k1 && o.report_k2) {
    in.mask = caep::prune(lvl.d, lvl.r, *o.report_k1, *o.report_k2);
    j["mask"] = json_io::to_json(*in.mask, doc.experts);
    const double pruned = 100.0 * (1.0 - static_cast<double>(in.mask->kept.size()) /
                                             static_cast<double>(in.mask->ne));
    j["pruned_percent"] = pruned;
    j["deepseek_moe_16b_params_billion"] = metrics::pruned_param_count(pruned);
  }
  write_text(out_path(o, "report.html"), report::report_html(in));
  json_io::write_json(j, out_path(o, "report.json"));
  m.config = {{"level", o.level}, {"tau", o.tau}};
  if (o.report_k1) m.config["k1"] = *o.report_k1;
  if (o.report_k2) m.config["k2"] = *o.report_k2;
  m.outputs = {"report.html", "report.json"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expert collaboration mining and contribution-aware pruning for MoE activations"};
  app.require_subcommand(1);
  Options o;

  auto add_output = [&](CLI::App* sc) {
    sc->add_option("--output-dir", o.output_dir, "Directory for outputs (created if missing)");
  };
  auto add_input = [&](CLI::App* sc, const std::string& what) {
    sc->add_option("--input", o.input, what)->required()->check(CLI::ExistingFile);
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic activation matrix with planted patterns");
  synth->add_option("--config", o.config, "Synthetic generator config (JSON)")->check(CLI::ExistingFile);
  synth->add_option("--seed", o.seed, "RNG seed");
  add_output(synth);

  auto* learn = app.add_subcommand("learn", "Fit a hierarchical sparse dictionary");
  add_input(learn, "MOEACT activation file");
  learn->add_option("--config", o.config, "HSDL config (JSON)")->check(CLI::ExistingFile);
  learn->add_option("--seed", o.seed, "RNG seed");
  learn->add_option("--levels", o.levels, "Hierarchy depth");
  learn->add_option("--np", o.np, "Atoms per level, e.g. 8 or 8,16");
  learn->add_option("--lambda0", o.lambda0, "Data-fidelity weight");
  learn->add_option("--lambda1", o.lambda1, "Inter-level consistency weight");
  learn->add_option("--lambda2", o.lambda2, "Cross-level reconstruction weight");
  learn->add_option("--max-iters", o.max_iters, "Outer iterations per level");
  learn->add_flag("--normalize", o.normalize, "Divide each sample by its token count");
  add_output(learn);

  auto* mine = app.add_subcommand("mine", "Exhaustive co-activation search");
  add_input(mine, "MOEACT activation file");
  mine->add_option("--order", o.order, "Combination size (2 or 3)")->check(CLI::IsMember({2, 3}));
  mine->add_option("--theta", o.theta, "Activation threshold (default: per-expert 75th percentile)");
  mine->add_option("--cap", o.cap, "Refuse tables larger than this many combinations");
  mine->add_flag("--normalize", o.normalize, "Divide each sample by its token count");
  add_output(mine);

  auto* cov = app.add_subcommand("coverage", "Top-k% coverage of learned atoms");
  add_input(cov, "Hierarchy JSON");
  cov->add_option("--table", o.table, "Co-activation table JSON")->required()->check(CLI::ExistingFile);
  cov->add_option("--tau", o.tau, "Relative binarization threshold");
  cov->add_option("--top-percent", o.top_percent, "k in top-k%");
  cov->add_option("--level", o.level, "Hierarchy level");
  add_output(cov);

  auto* prof = app.add_subcommand("profiles", "Per-domain expert activation profiles");
  add_input(prof, "MOEACT activation file");
  prof->add_option("--labels", o.labels, "Domain labels (JSON lines)")->required()->check(CLI::ExistingFile);
  prof->add_option("--theta", o.theta, "Activation threshold (default: per-expert 75th percentile)");
  prof->add_flag("--normalize", o.normalize, "Divide each sample by its token count");
  add_output(prof);

  auto* prune = app.add_subcommand("prune", "Contribution-aware expert pruning mask");
  add_input(prune, "Hierarchy JSON");
  prune->add_option("--k1", o.k1, "Threshold ratio in (0, 1)");
  prune->add_option("--k2", o.k2, "Target pruning ratio in (0, 1)");
  prune->add_option("--level", o.level, "Hierarchy level supplying D and R");
  add_output(prune);

  auto* annotate = app.add_subcommand("annotate", "Assign tokens to dictionary atoms");
  add_input(annotate, "Token-granularity MOEACT file");
  annotate->add_option("--hierarchy", o.hierarchy, "Hierarchy JSON")->required()->check(CLI::ExistingFile);
  annotate->add_option("--level", o.level, "Hierarchy level");
  annotate->add_option("--tau", o.tau, "Relative binarization threshold for the legend");
  annotate->add_option("--tokens", o.tokens, "Token text, JSON lines {\"sample\": i, \"tokens\": [...]}")
      ->check(CLI::ExistingFile);
  add_output(annotate);

  auto* rep = app.add_subcommand("report", "Contribution table and learned patterns");
  add_input(rep, "Hierarchy JSON");
  rep->add_option("--level", o.level, "Hierarchy level supplying D and R");
  rep->add_option("--tau", o.tau, "Relative binarization threshold");
  rep->add_option("--k1", o.report_k1, "Also compute a pruning mask with this threshold ratio");
  rep->add_option("--k2", o.report_k2, "Target pruning ratio for the optional mask");
  add_output(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) std::cerr << "error[usage]: ";
    return app.exit(e);
  }

  CLI::App* cmd = app.get_subcommands().front();
  RunManifest manifest;
  manifest.command = cmd->get_name();
  const auto start = std::chrono::steady_clock::now();
  try {
    fs::create_directories(o.output_dir);
    if (cmd == synth) run_synth(o, manifest);
    else if (cmd == learn) run_learn(o, manifest);
    else if (cmd == mine) run_mine(o, manifest);
    else if (cmd == cov) run_coverage(o, manifest);
    else if (cmd == prof) run_profiles(o, manifest);
    else if (cmd == prune) run_prune(o, manifest);
    else if (cmd == annotate) run_annotate(o, manifest);
    else if (cmd == rep) run_report(o, manifest);
    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json_io::write_json(manifest.to_json(), out_path(o, manifest.command + ".manifest.json"));
  } catch (const Error& e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
    return 10 + static_cast<int>(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error[io]: " << e.what() << '\n';
    return 10 + static_cast<int>(ErrorCategory::kIo);
  }
  return 0;
}
