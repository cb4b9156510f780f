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

// Contribution-aware expert pruning.
//
// Expert scores e = D * R_sum, where R_sum[p] is the total coding mass of
// pattern p. A threshold f is fixed once at the ceil(k1 * Ne)-th largest
// score; while more than (1 - k2) * Ne experts satisfy e >= f, the least-used
// pattern is dropped from D and R and the scores are recomputed.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "moecollab/activation.hpp"
#include "moecollab/error.hpp"

namespace moecollab::caep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ContributionState {
  VectorXd r_sum;  ///< per-pattern usage, length Np
  VectorXd e;      ///< per-expert contribution, length Ne
};

inline ContributionState contribution_scores(const MatrixXd& d, const MatrixXd& r) {
  require(d.cols() == r.rows(), ErrorCategory::kShape,
          "D has " + std::to_string(d.cols()) + " patterns, R has " + std::to_string(r.rows()));
  require(r.size() == 0 || (r.allFinite() && r.minCoeff() >= 0.0), ErrorCategory::kInvalidValue,
          "coding matrix R must be finite and nonnegative");
  ContributionState s;
  s.r_sum = r.rowwise().sum();
  s.e = d * s.r_sum;
  return s;
}

struct Threshold {
  double f = 0.0;
  std::size_t rank = 0;  ///< 1-based position of f in the descending order
  std::vector<std::uint8_t> mask;
};

inline std::vector<std::uint8_t> mask_at_least(const VectorXd& e, double f) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(e.size()));
  for (Eigen::Index i = 0; i < e.size(); ++i) m[static_cast<std::size_t>(i)] = e(i) >= f;
  return m;
}

inline std::size_t mask_count(std::span<const std::uint8_t> m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

/// f = e_sorted_desc[ceil(k1 * Ne)] (1-based, clamped to [1, Ne]); mask = e >= f.
inline Threshold threshold_mask(const VectorXd& e, double k1) {
  require(e.size() > 0, ErrorCategory::kShape, "no experts to threshold");
  require(k1 > 0.0 && k1 < 1.0, ErrorCategory::kConfig, "k1 must lie in (0, 1)");
  std::vector<double> sorted(e.data(), e.data() + e.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto ne = sorted.size();
  const double pos = std::ceil(k1 * static_cast<double>(ne));
  const std::size_t rank = std::clamp<std::size_t>(static_cast<std::size_t>(pos), 1, ne);
  Threshold t;
  t.rank = rank;
  t.f = sorted[rank - 1];
  t.mask = mask_at_least(e, t.f);
  return t;
}

struct PruneMask {
  std::size_t ne = 0;
  double k1 = 0.0;
  double k2 = 0.0;
  double f = 0.0;
  VectorXd initial_scores;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> kept;
  /// Removed patterns in removal order, as 1-based column numbers of the input D.
  std::vector<std::size_t> trace;
  /// Scores after each removal (one entry per loop iteration).
  std::vector<VectorXd> score_history;
  bool fallback_used = false;
};

inline std::vector<std::size_t> kept_indices(std::span<const std::uint8_t> mask) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) kept.push_back(i);
  return kept;
}

/// Cardinality bound (1 - k2) * Ne as an integer ceiling, snapping values that
/// are integral up to rounding error.
inline std::size_t keep_budget(std::size_t ne, double k2) {
  const double bound = (1.0 - k2) * static_cast<double>(ne);
  return static_cast<std::size_t>(std::ceil(bound - 1e-9));
}

inline PruneMask prune(const MatrixXd& d, const MatrixXd& r, double k1, double k2,
                       bool fallback = true) {
  require(k1 > 0.0 && k1 < 1.0 && k2 > 0.0 && k2 < 1.0, ErrorCategory::kConfig,
          "k1 and k2 must lie in (0, 1)");
  auto state = contribution_scores(d, r);
  const auto ne = static_cast<std::size_t>(d.rows());
  const Threshold th = threshold_mask(state.e, k1);

  PruneMask out;
  out.ne = ne;
  out.k1 = k1;
  out.k2 = k2;
  out.f = th.f;
  out.initial_scores = state.e;
  out.mask = th.mask;

  const double bound = (1.0 - k2) * static_cast<double>(ne);
  // Columns of the working D, as indices into the input. Removed patterns get
  // a zero weight so that e is always the same product D * R_sum.
  std::vector<std::size_t> alive(static_cast<std::size_t>(d.cols()));
  std::iota(alive.begin(), alive.end(), 0);
  VectorXd weights = state.r_sum;

  while (static_cast<double>(mask_count(out.mask)) > bound && !alive.empty()) {
    std::size_t victim = 0;
    for (std::size_t q = 1; q < alive.size(); ++q)
      if (state.r_sum(static_cast<Eigen::Index>(alive[q])) <
          state.r_sum(static_cast<Eigen::Index>(alive[victim])))
        victim = q;
    out.trace.push_back(alive[victim] + 1);
    weights(static_cast<Eigen::Index>(alive[victim])) = 0.0;
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(victim));

    state.e = d * weights;
    out.mask = mask_at_least(state.e, out.f);
    out.score_history.push_back(state.e);
  }

  if (fallback && static_cast<double>(mask_count(out.mask)) > bound) {
    const std::size_t budget = keep_budget(ne, k2);
    std::vector<std::size_t> order(ne);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return out.initial_scores(static_cast<Eigen::Index>(a)) >
             out.initial_scores(static_cast<Eigen::Index>(b));
    });
    std::fill(out.mask.begin(), out.mask.end(), 0);
    for (std::size_t q = 0; q < budget && q < ne; ++q) out.mask[order[q]] = 1;
    out.fallback_used = true;
  }
  out.kept = kept_indices(out.mask);
  return out;
}

/// Drops the rows whose mask entry is 0; kept rows retain their expert ids.
inline ExpertActivationMatrix apply_mask(const ExpertActivationMatrix& x,
                                         std::span<const std::uint8_t> mask) {
  require(mask.size() == x.num_experts(), ErrorCategory::kShape,
          "mask length " + std::to_string(mask.size()) + " != Ne " +
              std::to_string(x.num_experts()));
  const auto kept = kept_indices(mask);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(kept.size()), x.data().cols());
  std::vector<ExpertId> ids;
  ids.reserve(kept.size());
  for (std::size_t q = 0; q < kept.size(); ++q) {
    out.row(static_cast<Eigen::Index>(q)) = x.data().row(static_cast<Eigen::Index>(kept[q]));
    ids.push_back(x.expert_of(kept[q]));
  }
  return ExpertActivationMatrix(std::move(out), x.num_layers(), x.experts_per_layer(),
                                std::move(ids));
}

inline ExpertActivationMatrix apply_mask(const ActivationTensor& sentences,
                                         std::span<const std::uint8_t> mask) {
  return apply_mask(flatten_to_matrix(sentences), mask);
}

}  // namespace moecollab::caep
