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
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moecollab/activation.hpp"
#include "moecollab/error.hpp"
#include "moecollab/hsdl.hpp"

namespace moecollab::mining {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A binarized dictionary column.
struct PatternAtom {
  std::size_t atom_index = 0;
  std::vector<std::size_t> rows;  ///< ascending row indices of X
  std::vector<ExpertId> experts;  ///< identity of each row
  std::vector<double> weights;    ///< D[row, atom] for each retained row
  double usage = 0.0;             ///< L1 norm of the atom's coding row
};

namespace detail {

inline std::vector<ExpertId> identity_ids(std::size_t ne) {
  std::vector<ExpertId> ids(ne);
  for (std::size_t r = 0; r < ne; ++r) ids[r] = {0, static_cast<std::uint32_t>(r)};
  return ids;
}

}  // namespace detail

/// Row r belongs to atom p iff D[r, p] >= tau * max_r D[r, p]. `row_ids`
/// labels the rows; when empty, rows are labelled (0, r).
inline std::vector<PatternAtom> binarize_atoms(const MatrixXd& d, const MatrixXd& r, double tau,
                                               std::span<const ExpertId> row_ids = {}) {
  require(tau > 0.0 && tau < 1.0, ErrorCategory::kConfig, "tau must lie in (0, 1)");
  require(r.rows() == d.cols(), ErrorCategory::kShape, "coding rows must match atom count");
  const auto fallback = detail::identity_ids(static_cast<std::size_t>(d.rows()));
  if (row_ids.empty()) row_ids = fallback;
  require(row_ids.size() == static_cast<std::size_t>(d.rows()), ErrorCategory::kShape,
          "one expert id is required per dictionary row");
  std::vector<PatternAtom> atoms(static_cast<std::size_t>(d.cols()));
  for (Eigen::Index p = 0; p < d.cols(); ++p) {
    auto& a = atoms[static_cast<std::size_t>(p)];
    a.atom_index = static_cast<std::size_t>(p);
    a.usage = r.row(p).cwiseAbs().sum();
    const double mx = d.col(p).maxCoeff();
    if (!(mx > 0.0)) continue;
    for (Eigen::Index e = 0; e < d.rows(); ++e) {
      if (d(e, p) >= tau * mx) {
        a.rows.push_back(static_cast<std::size_t>(e));
        a.experts.push_back(row_ids[static_cast<std::size_t>(e)]);
        a.weights.push_back(d(e, p));
      }
    }
  }
  return atoms;
}

inline std::vector<PatternAtom> binarize_atoms(const hsdl::DictionaryLevel& level, double tau,
                                               std::span<const ExpertId> row_ids = {}) {
  return binarize_atoms(level.d, level.r, tau, row_ids);
}

/// Per-expert activation threshold; X[r, i] counts as active iff X[r, i] >= theta[r].
struct ActivationThreshold {
  VectorXd per_expert;

  static ActivationThreshold uniform(std::size_t ne, double theta) {
    require(std::isfinite(theta), ErrorCategory::kConfig, "theta must be finite");
    return {VectorXd::Constant(static_cast<Eigen::Index>(ne), theta)};
  }
};

/// Linear-interpolation quantile of each expert's nonzero values (q = 0.75 by
/// default). Experts that never fire get +inf and are never active.
inline ActivationThreshold percentile_threshold(const MatrixXd& x, double q = 0.75) {
  require(q >= 0.0 && q <= 1.0, ErrorCategory::kConfig, "quantile must lie in [0, 1]");
  ActivationThreshold t{VectorXd::Constant(x.rows(), std::numeric_limits<double>::infinity())};
  std::vector<double> vals;
  for (Eigen::Index e = 0; e < x.rows(); ++e) {
    vals.clear();
    for (Eigen::Index i = 0; i < x.cols(); ++i)
      if (x(e, i) > 0.0) vals.push_back(x(e, i));
    if (vals.empty()) continue;
    std::sort(vals.begin(), vals.end());
    const double pos = q * static_cast<double>(vals.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, vals.size() - 1);
    t.per_expert(e) = vals[lo] + (pos - static_cast<double>(lo)) * (vals[hi] - vals[lo]);
  }
  return t;
}

/// One bitset over samples per expert.
class ActivityBits {
 public:
  ActivityBits(const MatrixXd& x, const ActivationThreshold& theta)
      : ne_(static_cast<std::size_t>(x.rows())),
        ns_(static_cast<std::size_t>(x.cols())),
        words_((ns_ + 63) / 64),
        bits_(ne_ * words_, 0) {
    require(theta.per_expert.size() == x.rows(), ErrorCategory::kShape,
            "threshold needs one entry per expert");
    for (std::size_t e = 0; e < ne_; ++e)
      for (std::size_t i = 0; i < ns_; ++i)
        if (x(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(i)) >= theta.per_expert(static_cast<Eigen::Index>(e)))
          bits_[e * words_ + i / 64] |= std::uint64_t{1} << (i % 64);
  }

  std::size_t num_experts() const { return ne_; }
  std::size_t num_samples() const { return ns_; }
  bool active(std::size_t e, std::size_t i) const {
    return (bits_[e * words_ + i / 64] >> (i % 64)) & 1u;
  }

  std::size_t count(std::size_t e) const {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_; ++w) c += std::popcount(bits_[e * words_ + w]);
    return c;
  }

  std::size_t count(std::size_t a, std::size_t b) const {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_; ++w)
      c += std::popcount(bits_[a * words_ + w] & bits_[b * words_ + w]);
    return c;
  }

  std::size_t count(std::size_t a, std::size_t b, std::size_t c3) const {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_; ++w)
      c += std::popcount(bits_[a * words_ + w] & bits_[b * words_ + w] & bits_[c3 * words_ + w]);
    return c;
  }

 private:
  std::size_t ne_;
  std::size_t ns_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

struct Combination {
  std::array<std::uint32_t, 3> members{};  ///< first `order` entries are used, ascending
  std::size_t count = 0;                   ///< samples where all members are active
  double frequency = 0.0;                  ///< count / Ns
};

struct CoactivationTable {
  int order = 2;
  std::size_t num_experts = 0;
  std::size_t num_samples = 0;
  VectorXd threshold;
  /// All C(Ne, order) combinations, by descending frequency, ties broken
  /// lexicographically on member indices.
  std::vector<Combination> entries;

  std::span<const std::uint32_t> members(const Combination& c) const {
    return std::span<const std::uint32_t>(c.members.data(), static_cast<std::size_t>(order));
  }

  /// Leading ceil(k% * size) entries.
  std::span<const Combination> top(double k_percent) const {
    require(k_percent > 0.0 && k_percent <= 100.0, ErrorCategory::kConfig,
            "k_percent must lie in (0, 100]");
    const double exact = k_percent / 100.0 * static_cast<double>(entries.size());
    const auto n = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    return std::span<const Combination>(entries).first(std::min(n, entries.size()));
  }
};

inline constexpr double kDefaultCombinationCap = 5e6;

inline double binomial(std::size_t n, int k) {
  double out = 1.0;
  for (int i = 0; i < k; ++i) out *= static_cast<double>(n - static_cast<std::size_t>(i)) / (i + 1);
  return n < static_cast<std::size_t>(k) ? 0.0 : out;
}

inline CoactivationTable exhaustive_coactivation(const MatrixXd& x, const ActivationThreshold& theta,
                                                 int order, double cap = kDefaultCombinationCap) {
  require(order == 2 || order == 3, ErrorCategory::kConfig, "order must be 2 or 3");
  const auto ne = static_cast<std::size_t>(x.rows());
  const double total = binomial(ne, order);
  require(total <= cap, ErrorCategory::kConfig,
          "C(" + std::to_string(ne) + ", " + std::to_string(order) + ") = " +
              std::to_string(static_cast<long long>(total)) + " combinations exceeds the cap");
  const ActivityBits bits(x, theta);
  CoactivationTable t;
  t.order = order;
  t.num_experts = ne;
  t.num_samples = bits.num_samples();
  t.threshold = theta.per_expert;
  t.entries.reserve(static_cast<std::size_t>(total));
  auto freq = [&](std::size_t c) {
    return t.num_samples ? static_cast<double>(c) / static_cast<double>(t.num_samples) : 0.0;
  };
  auto u32 = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  for (std::size_t a = 0; a < ne; ++a) {
    for (std::size_t b = a + 1; b < ne; ++b) {
      if (order == 2) {
        const auto c = bits.count(a, b);
        t.entries.push_back({{u32(a), u32(b), 0}, c, freq(c)});
        continue;
      }
      for (std::size_t c3 = b + 1; c3 < ne; ++c3) {
        const auto c = bits.count(a, b, c3);
        t.entries.push_back({{u32(a), u32(b), u32(c3)}, c, freq(c)});
      }
    }
  }
  // Enumeration order is already lexicographic, so a stable sort on the count
  // yields the lexicographic tie-break.
  std::stable_sort(t.entries.begin(), t.entries.end(),
                   [](const Combination& l, const Combination& r) { return l.count > r.count; });
  return t;
}

/// Fraction of atoms whose expert set contains at least one of the top
/// k% combinations as a subset.
inline double coverage(std::span<const PatternAtom> atoms, const CoactivationTable& table,
                       double k_percent) {
  require(!atoms.empty(), ErrorCategory::kUndefined, "coverage is undefined for zero atoms");
  const auto top = table.top(k_percent);
  std::size_t covered = 0;
  std::vector<char> in_set(table.num_experts, 0);
  for (const auto& atom : atoms) {
    std::fill(in_set.begin(), in_set.end(), 0);
    for (auto r : atom.rows) {
      require(r < table.num_experts, ErrorCategory::kShape, "atom row outside the table's experts");
      in_set[r] = 1;
    }
    const bool hit = std::any_of(top.begin(), top.end(), [&](const Combination& c) {
      const auto m = table.members(c);
      return std::all_of(m.begin(), m.end(), [&](std::uint32_t e) { return in_set[e] != 0; });
    });
    covered += hit;
  }
  return static_cast<double>(covered) / static_cast<double>(atoms.size());
}

struct DomainProfile {
  std::string domain;
  VectorXd frequency;  ///< sums to 1 unless degenerate
  std::size_t num_samples = 0;
  std::size_t activations = 0;
  bool degenerate = false;  ///< no activations at all
};

/// Per-domain share of activations attributed to each expert; domains are
/// returned in sorted label order.
inline std::vector<DomainProfile> domain_profiles(const MatrixXd& x, const DomainLabels& labels,
                                                  const ActivationThreshold& theta) {
  require(labels.num_samples() == static_cast<std::size_t>(x.cols()), ErrorCategory::kShape,
          "labels cover " + std::to_string(labels.num_samples()) + " samples, X has " +
              std::to_string(x.cols()));
  require(theta.per_expert.size() == x.rows(), ErrorCategory::kShape,
          "threshold needs one entry per expert");
  std::map<std::string, std::size_t> index;
  std::vector<DomainProfile> out;
  for (const auto& d : labels.domains()) {
    index.emplace(d, out.size());
    out.push_back({d, VectorXd::Zero(x.rows()), 0, 0, false});
  }
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const auto it = index.find(labels.domain_of(static_cast<std::size_t>(i)));
    require(it != index.end(), ErrorCategory::kConfig, "unknown label for sample " + std::to_string(i));
    auto& prof = out[it->second];
    ++prof.num_samples;
    for (Eigen::Index e = 0; e < x.rows(); ++e) {
      if (x(e, i) >= theta.per_expert(e)) {
        prof.frequency(e) += 1.0;
        ++prof.activations;
      }
    }
  }
  for (auto& p : out) {
    if (p.activations == 0) {
      p.degenerate = true;
    } else {
      p.frequency /= static_cast<double>(p.activations);
    }
  }
  return out;
}

/// Marker for similarity entries involving a zero profile.
inline constexpr double kUndefinedSimilarity = std::numeric_limits<double>::quiet_NaN();

inline bool is_undefined(double v) { return std::isnan(v); }

/// Cosine similarity between every pair of profiles.
inline MatrixXd similarity_matrix(std::span<const VectorXd> profiles) {
  require(!profiles.empty(), ErrorCategory::kConfig, "need at least one profile");
  const auto n = static_cast<Eigen::Index>(profiles.size());
  for (const auto& p : profiles)
    require(p.size() == profiles.front().size(), ErrorCategory::kShape,
            "profiles must have equal lengths");
  MatrixXd s(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      const double na = profiles[a].norm();
      const double nb = profiles[b].norm();
      double v = kUndefinedSimilarity;
      if (na > 0.0 && nb > 0.0) {
        v = a == b ? 1.0 : std::clamp(profiles[a].dot(profiles[b]) / (na * nb), -1.0, 1.0);
      }
      s(a, b) = v;
      s(b, a) = v;
    }
  }
  return s;
}

inline MatrixXd similarity_matrix(std::span<const DomainProfile> profiles) {
  std::vector<VectorXd> v;
  v.reserve(profiles.size());
  for (const auto& p : profiles) v.push_back(p.frequency);
  return similarity_matrix(std::span<const VectorXd>(v));
}

inline constexpr int kUnassigned = -1;

struct TokenAnnotation {
  std::size_t level = 1;
  /// assignments[i][t]: atom index of token t of sample i, or kUnassigned.
  std::vector<std::vector<int>> assignments;
  /// Binarized atoms of the level, for legends.
  std::vector<PatternAtom> atoms;
};

/// Largest coefficient wins, lowest index on ties; all-zero codes stay unassigned.
inline int assign_atom(const VectorXd& code) {
  int best = kUnassigned;
  double best_v = 0.0;
  for (Eigen::Index p = 0; p < code.size(); ++p) {
    if (code(p) > best_v) {
      best_v = code(p);
      best = static_cast<int>(p);
    }
  }
  return best;
}

/// Encodes every token's flattened routing vector against D_k and assigns it
/// to its dominant atom.
inline TokenAnnotation annotate_tokens(const ActivationTensor& tokens, const hsdl::Hierarchy& h,
                                       std::size_t k, double tau,
                                       const hsdl::EncodeOptions& enc = {}) {
  require(tokens.is_token(), ErrorCategory::kFormat, "annotation needs a token-granularity tensor");
  const auto& lvl = h.level(k);
  require(tokens.num_experts() == static_cast<std::size_t>(lvl.d.rows()), ErrorCategory::kShape,
          "tensor has " + std::to_string(tokens.num_experts()) + " experts, dictionary has " +
              std::to_string(lvl.d.rows()) + " rows");
  TokenAnnotation out;
  out.level = k;
  std::vector<ExpertId> ids(tokens.num_experts());
  for (std::size_t r = 0; r < ids.size(); ++r) ids[r] = expert_at_row(r, tokens.experts_per_layer());
  out.atoms = binarize_atoms(lvl, tau, ids);
  out.assignments.resize(tokens.num_samples());
  std::size_t row = 0;
  VectorXd v(static_cast<Eigen::Index>(tokens.num_experts()));
  for (std::size_t i = 0; i < tokens.num_samples(); ++i) {
    out.assignments[i].reserve(tokens.token_counts()[i]);
    for (std::uint32_t t = 0; t < tokens.token_counts()[i]; ++t, ++row) {
      const auto vals = tokens.row(row);
      for (std::size_t e = 0; e < vals.size(); ++e) v(static_cast<Eigen::Index>(e)) = vals[e];
      out.assignments[i].push_back(assign_atom(hsdl::encode(v, lvl.d, enc)));
    }
  }
  return out;
}

}  // namespace moecollab::mining
