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

// Hierarchical sparse dictionary learning.
//
// Level 1 factors X ~ D1 R1; level k+1 factors the atoms of level k,
// Dk ~ Dk+1 Rk+1. Each level is fit by alternating projected (sub)gradient
// steps: one R step, then one D step per outer iteration. A step is accepted
// only if the level objective does not increase; otherwise its step size is
// halved and the step retried.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "moecollab/error.hpp"
#include "moecollab/hsdl_losses.hpp"

namespace moecollab::hsdl {

struct HsdlConfig {
  /// Atom count per level; its length is the hierarchy depth.
  std::vector<std::size_t> capacities{8, 16};
  double lambda0 = 1000.0;
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  /// Initial step as a fraction of the inverse Lipschitz estimate of the
  /// smooth part of each block.
  double learning_rate = 1.0;
  std::size_t max_iters = 500;
  double convergence_tol = 1e-6;
  std::uint64_t seed = 0;
};

inline void validate(const HsdlConfig& c) {
  require(!c.capacities.empty(), ErrorCategory::kConfig, "hierarchy depth must be at least 1");
  for (auto np : c.capacities) require(np >= 1, ErrorCategory::kConfig, "capacities must be >= 1");
  require(c.lambda0 >= 0 && c.lambda1 >= 0 && c.lambda2 >= 0, ErrorCategory::kConfig,
          "loss weights must be nonnegative");
  require(std::isfinite(c.lambda0) && std::isfinite(c.lambda1) && std::isfinite(c.lambda2),
          ErrorCategory::kConfig, "loss weights must be finite");
  require(c.learning_rate > 0 && std::isfinite(c.learning_rate), ErrorCategory::kConfig,
          "learning_rate must be positive");
  require(c.max_iters >= 1, ErrorCategory::kConfig, "max_iters must be >= 1");
  require(c.convergence_tol >= 0, ErrorCategory::kConfig, "convergence_tol must be >= 0");
}

struct DictionaryLevel {
  std::size_t k = 1;
  MatrixXd d;  ///< Ne x Np, unit-norm nonnegative columns
  MatrixXd r;  ///< Np x (Ns at level 1, Np_{k-1} otherwise)
  /// Objective after initialization and after every outer iteration.
  std::vector<double> loss_trace;
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t num_atoms() const { return static_cast<std::size_t>(d.cols()); }
};

struct Hierarchy {
  std::vector<DictionaryLevel> levels;
  std::size_t num_experts = 0;
  std::size_t num_samples = 0;

  const DictionaryLevel& level(std::size_t k) const {
    require(k >= 1 && k <= levels.size(), ErrorCategory::kConfig,
            "level " + std::to_string(k) + " does not exist");
    return levels[k - 1];
  }
};

namespace detail {

/// Largest eigenvalue of a symmetric PSD matrix.
inline double spectral_norm_sym(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

/// argmin over r >= 0 of 0.5 ||r - v||^2 + t * max(r): clip v to [0, s] where
/// the clipped-off mass above s equals t.
inline VectorXd prox_max_nonneg(const VectorXd& v, double t) {
  VectorXd pos = v.cwiseMax(0.0);
  if (t <= 0.0) return pos;
  if (pos.sum() <= t) return VectorXd::Zero(v.size());
  std::vector<double> sorted(pos.data(), pos.data() + pos.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cum = 0.0;
  double s = 0.0;
  for (std::size_t q = 0; q < sorted.size(); ++q) {
    cum += sorted[q];
    const double cand = (cum - t) / static_cast<double>(q + 1);
    const double next = q + 1 < sorted.size() ? sorted[q + 1] : 0.0;
    if (cand >= next) {
      s = cand;
      break;
    }
  }
  return pos.cwiseMin(s);
}

}  // namespace detail

struct EncodeOptions {
  /// Weight of the max-coefficient penalty.
  double penalty = 0.0;
  std::size_t max_iters = 5000;
  double tol = 1e-12;
};

/// Nonnegative code r minimizing ||x - D r||^2 + penalty * max(r), computed by
/// accelerated projected (proximal) gradient from r = 0.
inline VectorXd encode(const VectorXd& x, const MatrixXd& d, const EncodeOptions& opt = {}) {
  require(x.size() == d.rows(), ErrorCategory::kShape, "vector length must match dictionary rows");
  require(x.allFinite() && d.allFinite(), ErrorCategory::kInvalidValue,
          "encode input must be finite");
  require(opt.penalty >= 0.0, ErrorCategory::kConfig, "penalty must be nonnegative");
  const Eigen::Index np = d.cols();
  VectorXd r = VectorXd::Zero(np);
  if (np == 0) return r;
  const MatrixXd gram = d.transpose() * d;
  const VectorXd dtx = d.transpose() * x;
  const double lip = 2.0 * detail::spectral_norm_sym(gram);
  if (lip == 0.0) return r;
  const double step = 1.0 / lip;
  VectorXd y = r;
  double t = 1.0;
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    const VectorXd grad = 2.0 * (gram * y - dtx);
    const VectorXd next = detail::prox_max_nonneg(y - step * grad, step * opt.penalty);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double change = (next - r).norm();
    y = next + ((t - 1.0) / t_next) * (next - r);
    r = next;
    t = t_next;
    if (change <= opt.tol * (1.0 + r.norm())) break;
  }
  return r;
}

/// Column-wise encode of a whole matrix.
inline MatrixXd encode_columns(const MatrixXd& x, const MatrixXd& d, const EncodeOptions& opt = {}) {
  MatrixXd r(d.cols(), x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) r.col(i) = encode(x.col(i), d, opt);
  return r;
}

namespace detail {

/// Objective of one level. Without a parent it is the level-1 objective
/// (sparsity plus weighted data fidelity against the target); with a parent
/// coding it is the child objective (sparsity plus the cross-level terms).
class LevelObjective {
 public:
  LevelObjective(const MatrixXd& target, const MatrixXd* parent_coding, const HsdlConfig& cfg)
      : target_(target), parent_(parent_coding), cfg_(cfg) {}

  bool is_child() const { return parent_ != nullptr; }

  LossTerms terms(const MatrixXd& d, const MatrixXd& r) const {
    LossTerms t;
    t.sparse = loss_sparse(r);
    if (is_child()) {
      t.hier = loss_hier(*parent_, r);
      t.rec = loss_rec(target_, d, *parent_, r);
    } else {
      t.data = loss_data(target_, d, r);
    }
    return t;
  }

  double value(const MatrixXd& d, const MatrixXd& r) const {
    return loss_total(terms(d, r), cfg_.lambda0, cfg_.lambda1, cfg_.lambda2);
  }

  MatrixXd grad_r(const MatrixXd& d, const MatrixXd& r) const {
    MatrixXd g = loss_sparse_subgradient(r);
    if (is_child()) {
      g += cfg_.lambda1 * loss_hier_gradient(*parent_, r).d_rn;
      g += cfg_.lambda2 * loss_rec_gradient(target_, d, *parent_, r).d_rn;
    } else {
      g += cfg_.lambda0 * loss_data_gradient(target_, d, r).d_r;
    }
    return g;
  }

  MatrixXd grad_d(const MatrixXd& d, const MatrixXd& r) const {
    if (is_child()) return cfg_.lambda2 * loss_rec_gradient(target_, d, *parent_, r).d_dn;
    return cfg_.lambda0 * loss_data_gradient(target_, d, r).d_d;
  }

  /// Step scale for the R block: inverse curvature of the smooth part, or of
  /// a quadratic proxy for the L1 reconstruction term at child levels.
  double base_step_r(const MatrixXd& d) const {
    const double g = spectral_norm_sym(d.transpose() * d);
    double lip = 0.0;
    if (is_child()) {
      lip = cfg_.lambda2 * mean_parent_usage() * g / static_cast<double>(target_.cols());
    } else if (target_.size()) {
      lip = 2.0 * cfg_.lambda0 * g / static_cast<double>(target_.size());
    }
    return lip > 0.0 ? 1.0 / lip : 1.0;
  }

  double base_step_d(const MatrixXd& r) const {
    const double g = spectral_norm_sym(r * r.transpose());
    double lip = 0.0;
    if (is_child()) {
      lip = cfg_.lambda2 * mean_parent_usage() * g / static_cast<double>(target_.cols());
    } else if (target_.size()) {
      lip = 2.0 * cfg_.lambda0 * g / static_cast<double>(target_.size());
    }
    return lip > 0.0 ? 1.0 / lip : 1.0;
  }

 private:
  double mean_parent_usage() const {
    if (parent_->rows() == 0) return 0.0;
    return parent_->cwiseAbs().sum() / static_cast<double>(parent_->rows());
  }

  const MatrixXd& target_;
  const MatrixXd* parent_;
  const HsdlConfig& cfg_;
};

/// Projects D onto nonnegative unit-norm columns, moving each column's scale
/// into the matching row of R so that D R is unchanged. Columns that project
/// to zero keep their previous value.
inline void normalize_columns(MatrixXd& d, MatrixXd& r, const MatrixXd& d_prev,
                              const MatrixXd& r_prev) {
  d = d.cwiseMax(0.0);
  for (Eigen::Index p = 0; p < d.cols(); ++p) {
    const double norm = d.col(p).norm();
    if (norm > 0.0 && std::isfinite(norm)) {
      d.col(p) /= norm;
      r.row(p) *= norm;
    } else {
      d.col(p) = d_prev.col(p);
      r.row(p) = r_prev.row(p);
    }
  }
}

inline MatrixXd init_dictionary(const MatrixXd& target, std::size_t np, std::mt19937_64& rng) {
  const Eigen::Index ne = target.rows();
  MatrixXd d(ne, static_cast<Eigen::Index>(np));
  std::vector<Eigen::Index> nonzero;
  for (Eigen::Index i = 0; i < target.cols(); ++i)
    if (target.col(i).norm() > 0.0) nonzero.push_back(i);
  std::shuffle(nonzero.begin(), nonzero.end(), rng);
  std::normal_distribution<double> z(0.0, 1.0);
  const double noise = 0.01 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(ne, 1)));
  for (std::size_t p = 0; p < np; ++p) {
    VectorXd col;
    if (nonzero.empty()) {
      col = VectorXd::NullaryExpr(ne, [&] { return std::abs(z(rng)); });
    } else {
      // Distinct columns while they last, then cycle through them again.
      col = target.col(nonzero[p % nonzero.size()]);
      col /= col.norm();
      for (Eigen::Index e = 0; e < ne; ++e) col(e) += noise * std::abs(z(rng));
    }
    const double n = col.norm();
    d.col(static_cast<Eigen::Index>(p)) = n > 0.0 ? VectorXd(col / n) : VectorXd::Constant(ne, 1.0 / std::sqrt(double(ne)));
  }
  return d;
}

inline void check_finite(double loss, std::size_t iter) {
  if (!std::isfinite(loss))
    fail(ErrorCategory::kNumerical,
         "non-finite loss at iteration " + std::to_string(iter));
}

inline DictionaryLevel fit(const MatrixXd& target, std::size_t np, const HsdlConfig& cfg,
                           const MatrixXd* parent_coding, std::size_t level_index,
                           std::uint64_t seed) {
  require(np >= 1, ErrorCategory::kConfig, "dictionary capacity must be >= 1");
  require(target.allFinite() && (target.size() == 0 || target.minCoeff() >= 0.0),
          ErrorCategory::kInvalidValue, "target must be finite and nonnegative");
  std::mt19937_64 rng(seed);
  DictionaryLevel lvl;
  lvl.k = level_index;
  lvl.d = init_dictionary(target, np, rng);
  lvl.r = encode_columns(target, lvl.d, {0.0, 200, 1e-10});

  const LevelObjective obj(target, parent_coding, cfg);
  double loss = obj.value(lvl.d, lvl.r);
  check_finite(loss, 0);
  lvl.loss_trace.push_back(loss);

  constexpr int kMaxHalvings = 40;
  double scale_r = cfg.learning_rate;
  double scale_d = cfg.learning_rate;

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    const double before = loss;

    // R step.
    {
      const MatrixXd g = obj.grad_r(lvl.d, lvl.r);
      const double base = obj.base_step_r(lvl.d);
      for (int h = 0; h < kMaxHalvings; ++h) {
        MatrixXd cand = (lvl.r - (scale_r * base) * g).cwiseMax(0.0);
        const double cand_loss = obj.value(lvl.d, cand);
        check_finite(cand_loss, it);
        if (cand_loss <= loss) {
          lvl.r = std::move(cand);
          loss = cand_loss;
          scale_r = std::min(scale_r * 2.0, cfg.learning_rate);
          break;
        }
        scale_r *= 0.5;
      }
    }

    // D step.
    {
      const MatrixXd g = obj.grad_d(lvl.d, lvl.r);
      const double base = obj.base_step_d(lvl.r);
      for (int h = 0; h < kMaxHalvings; ++h) {
        MatrixXd cand_d = lvl.d - (scale_d * base) * g;
        MatrixXd cand_r = lvl.r;
        normalize_columns(cand_d, cand_r, lvl.d, lvl.r);
        const double cand_loss = obj.value(cand_d, cand_r);
        check_finite(cand_loss, it);
        if (cand_loss <= loss) {
          lvl.d = std::move(cand_d);
          lvl.r = std::move(cand_r);
          loss = cand_loss;
          scale_d = std::min(scale_d * 2.0, cfg.learning_rate);
          break;
        }
        scale_d *= 0.5;
      }
    }

    lvl.loss_trace.push_back(loss);
    lvl.iterations = it;
    const double rel = std::abs(before - loss) / std::max(std::abs(before), 1e-300);
    if (loss == 0.0 || rel < cfg.convergence_tol) {
      lvl.converged = true;
      break;
    }
  }
  return lvl;
}

inline std::uint64_t level_seed(std::uint64_t seed, std::size_t level) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(level)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace detail

/// Single-level fit of `target` (level-1 objective).
inline DictionaryLevel fit_level(const MatrixXd& target, std::size_t np, const HsdlConfig& cfg) {
  validate(cfg);
  return detail::fit(target, np, cfg, nullptr, 1, detail::level_seed(cfg.seed, 1));
}

/// Fits `cfg.capacities.size()` levels: level 1 on X, each further level on
/// the previous level's atoms with the cross-level terms active.
inline Hierarchy fit_hierarchy(const MatrixXd& x, const HsdlConfig& cfg) {
  validate(cfg);
  Hierarchy h;
  h.num_experts = static_cast<std::size_t>(x.rows());
  h.num_samples = static_cast<std::size_t>(x.cols());
  for (std::size_t k = 1; k <= cfg.capacities.size(); ++k) {
    const std::size_t np = cfg.capacities[k - 1];
    const std::uint64_t seed = detail::level_seed(cfg.seed, k);
    if (k == 1) {
      h.levels.push_back(detail::fit(x, np, cfg, nullptr, 1, seed));
    } else {
      const DictionaryLevel& parent = h.levels.back();
      // Copies: push_back may reallocate while `parent` is referenced.
      const MatrixXd target = parent.d;
      const MatrixXd coding = parent.r;
      h.levels.push_back(detail::fit(target, np, cfg, &coding, k, seed));
    }
  }
  return h;
}

/// Objective terms of level k in a fitted hierarchy.
inline LossTerms level_terms(const Hierarchy& h, const MatrixXd& x, std::size_t k) {
  const auto& lvl = h.level(k);
  LossTerms t;
  t.sparse = loss_sparse(lvl.r);
  if (k == 1) {
    t.data = loss_data(x, lvl.d, lvl.r);
  } else {
    const auto& parent = h.level(k - 1);
    t.hier = loss_hier(parent.r, lvl.r);
    t.rec = loss_rec(parent.d, lvl.d, parent.r, lvl.r);
  }
  return t;
}

}  // namespace moecollab::hsdl
