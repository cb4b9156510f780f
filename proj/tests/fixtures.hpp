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

// Synthetic data sets shared by the unit and acceptance tests.

#pragma once

#include <set>
#include <vector>

#include "moecollab/synthgen.hpp"

namespace moecollab::fixtures {

struct Planted {
  synth::SynthConfig config;
  synth::SynthResult data;

  std::vector<std::set<std::size_t>> supports() const {
    std::vector<std::set<std::size_t>> out;
    for (const auto& p : config.patterns) out.emplace_back(p.experts.begin(), p.experts.end());
    return out;
  }
};

/// 64 experts, 500 samples, 8 disjoint patterns of 3-5 experts, sigma 0.05,
/// activation probability 0.3.
inline Planted recovery_data(std::uint64_t seed) {
  Planted p;
  p.config.num_experts = 64;
  p.config.num_samples = 500;
  p.config.patterns = synth::disjoint_patterns(64, 8, 3, 5, 0.6, 1.0, 1000 + seed);
  p.config.activation_prob = 0.3;
  p.config.noise_sigma = 0.05;
  p.config.seed = seed;
  p.data = synth::generate(p.config);
  return p;
}

struct TwoTier {
  std::vector<synth::PlantedPattern> fine;    // 8 patterns
  std::vector<synth::PlantedPattern> coarse;  // coarse c = fine 2c U fine 2c+1
  synth::SynthResult data;
};

inline TwoTier two_tier_data(std::uint64_t seed) {
  TwoTier t;
  t.fine = synth::disjoint_patterns(64, 8, 3, 4, 0.6, 1.0, 500 + seed);
  t.coarse.resize(4);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t f : {2 * c, 2 * c + 1}) {
      auto& dst = t.coarse[c];
      dst.experts.insert(dst.experts.end(), t.fine[f].experts.begin(), t.fine[f].experts.end());
      dst.weights.insert(dst.weights.end(), t.fine[f].weights.begin(), t.fine[f].weights.end());
    }
  }
  synth::SynthConfig sc;
  sc.num_experts = 64;
  sc.num_samples = 500;
  sc.patterns = t.coarse;
  sc.activation_prob = 0.3;
  sc.noise_sigma = 0.05;
  sc.seed = seed;
  t.data = synth::generate(sc);
  return t;
}

}  // namespace moecollab::fixtures
