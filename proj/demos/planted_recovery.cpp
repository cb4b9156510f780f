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

// Plants expert cliques in synthetic routing data, learns a two-level
// dictionary, and prints which planted cliques the level-1 atoms recover,
// followed by a pruning mask computed from the learned factors.
//
//   planted_recovery [seed]

#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>

#include "moecollab/caep.hpp"
#include "moecollab/hsdl.hpp"
#include "moecollab/mining.hpp"
#include "moecollab/synthgen.hpp"

using namespace moecollab;

namespace {

std::string set_text(const std::vector<std::size_t>& v) {
  std::string s = "{";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + "}";
}

double jaccard(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  const std::set<std::size_t> sa(a.begin(), a.end());
  std::size_t inter = 0;
  for (auto v : b) inter += sa.count(v);
  const auto uni = sa.size() + b.size() - inter;
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;

  synth::SynthConfig sc;
  sc.num_experts = 64;
  sc.num_samples = 500;
  sc.patterns = synth::disjoint_patterns(64, 8, 3, 5, 0.6, 1.0, 1000 + seed);
  sc.noise_sigma = 0.05;
  sc.seed = seed;
  const auto data = synth::generate(sc);

  hsdl::HsdlConfig cfg;
  cfg.capacities = {12, 24};
  cfg.seed = seed;
  const auto h = hsdl::fit_hierarchy(data.x.data(), cfg);
  for (const auto& lvl : h.levels)
    std::printf("level %zu: %zu atoms, %zu iterations, loss %.5f -> %.5f\n", lvl.k, lvl.num_atoms(),
                lvl.iterations, lvl.loss_trace.front(), lvl.loss_trace.back());

  const auto atoms = mining::binarize_atoms(h.level(1), 0.5);
  std::printf("\nplanted clique          best level-1 atom      jaccard\n");
  for (const auto& p : sc.patterns) {
    double best = 0.0;
    std::size_t arg = 0;
    for (const auto& a : atoms) {
      const double j = jaccard(p.experts, a.rows);
      if (j > best) best = j, arg = a.atom_index;
    }
    std::printf("%-22s  %-22s %.2f\n", set_text(p.experts).c_str(), set_text(atoms[arg].rows).c_str(), best);
  }

  const auto mask = caep::prune(h.level(1).d, h.level(1).r, 0.5, 0.25);
  std::printf("\npruning k1=0.5 k2=0.25: keep %zu of %zu experts, removed patterns:", mask.kept.size(),
              mask.ne);
  for (auto p : mask.trace) std::printf(" %zu", p);
  std::printf("%s\n", mask.fallback_used ? " (fallback)" : "");
  return 0;
}
