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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "moecollab/activation.hpp"
#include "moecollab/error.hpp"

namespace moecollab::synth {

/// Ground-truth expert clique: rows of X that fire together with fixed
/// relative weights.
struct PlantedPattern {
  std::vector<std::size_t> experts;
  std::vector<double> weights;
};

struct SynthConfig {
  std::size_t num_experts = 0;
  std::size_t num_samples = 0;
  /// Layer layout of the generated rows; must divide num_experts.
  std::size_t num_layers = 1;
  std::vector<PlantedPattern> patterns;
  double activation_prob = 0.3;
  double noise_sigma = 0.0;
  /// Per-sample multiplicative gain range.
  double gain_min = 0.5;
  double gain_max = 1.5;
  std::uint64_t seed = 0;
};

struct SynthResult {
  ExpertActivationMatrix x;
  /// fired[i] lists the pattern indices that fired in sample i, ascending.
  std::vector<std::vector<std::size_t>> fired;
};

inline void validate(const SynthConfig& c) {
  require(c.activation_prob >= 0.0 && c.activation_prob <= 1.0, ErrorCategory::kConfig,
          "activation_prob must lie in [0, 1]");
  require(c.noise_sigma >= 0.0, ErrorCategory::kConfig, "noise_sigma must be >= 0");
  require(c.gain_min > 0.0 && c.gain_min <= c.gain_max, ErrorCategory::kConfig,
          "gain range must satisfy 0 < gain_min <= gain_max");
  require(c.num_layers >= 1 && c.num_experts % c.num_layers == 0, ErrorCategory::kConfig,
          "num_layers must divide num_experts");
  for (std::size_t p = 0; p < c.patterns.size(); ++p) {
    const auto& pat = c.patterns[p];
    const auto tag = "pattern " + std::to_string(p);
    require(!pat.experts.empty(), ErrorCategory::kConfig, tag + " has no experts");
    require(pat.experts.size() == pat.weights.size(), ErrorCategory::kConfig,
            tag + " needs one weight per expert");
    for (std::size_t e : pat.experts)
      require(e < c.num_experts, ErrorCategory::kConfig,
              tag + " references expert " + std::to_string(e) + " >= Ne");
    for (double w : pat.weights)
      require(w > 0.0 && std::isfinite(w), ErrorCategory::kConfig, tag + " has a non-positive weight");
  }
}

/// Deterministic in `config.seed`. Draw order per sample: gain, one Bernoulli
/// per pattern, then one Gaussian per expert when noise_sigma > 0.
inline SynthResult generate(const SynthConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> gain_dist(config.gain_min, config.gain_max);
  std::bernoulli_distribution fire(config.activation_prob);
  std::normal_distribution<double> noise(0.0, config.noise_sigma > 0.0 ? config.noise_sigma : 1.0);

  const auto ne = static_cast<Eigen::Index>(config.num_experts);
  const auto ns = static_cast<Eigen::Index>(config.num_samples);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(ne, ns);
  std::vector<std::vector<std::size_t>> fired(config.num_samples);

  for (Eigen::Index i = 0; i < ns; ++i) {
    const double gain = config.gain_min == config.gain_max ? config.gain_min : gain_dist(rng);
    for (std::size_t p = 0; p < config.patterns.size(); ++p) {
      if (!fire(rng)) continue;
      fired[i].push_back(p);
      const auto& pat = config.patterns[p];
      for (std::size_t m = 0; m < pat.experts.size(); ++m)
        x(static_cast<Eigen::Index>(pat.experts[m]), i) += pat.weights[m] * gain;
    }
    if (config.noise_sigma > 0.0) {
      for (Eigen::Index r = 0; r < ne; ++r) x(r, i) += noise(rng);
    }
  }
  x = x.cwiseMax(0.0);
  return {ExpertActivationMatrix(std::move(x), config.num_layers,
                                 config.num_experts / config.num_layers),
          std::move(fired)};
}

/// `count` patterns on pairwise-disjoint random supports with sizes drawn from
/// [min_size, max_size] and weights from [weight_min, weight_max].
inline std::vector<PlantedPattern> disjoint_patterns(std::size_t num_experts, std::size_t count,
                                                     std::size_t min_size, std::size_t max_size,
                                                     double weight_min, double weight_max,
                                                     std::uint64_t seed) {
  require(min_size >= 1 && min_size <= max_size, ErrorCategory::kConfig, "bad pattern size range");
  require(count * max_size <= num_experts, ErrorCategory::kConfig,
          "not enough experts for disjoint patterns");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(num_experts);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::uniform_int_distribution<std::size_t> size_dist(min_size, max_size);
  std::uniform_real_distribution<double> w_dist(weight_min, weight_max);
  std::vector<PlantedPattern> out(count);
  std::size_t next = 0;
  for (auto& pat : out) {
    const std::size_t s = size_dist(rng);
    pat.experts.assign(perm.begin() + static_cast<std::ptrdiff_t>(next),
                       perm.begin() + static_cast<std::ptrdiff_t>(next + s));
    std::sort(pat.experts.begin(), pat.experts.end());
    next += s;
    for (std::size_t m = 0; m < s; ++m) pat.weights.push_back(w_dist(rng));
  }
  return out;
}

}  // namespace moecollab::synth
