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

// Loss terms of hierarchical sparse dictionary learning, with their analytic
// (sub)gradients. Notation: level k has dictionary Dk (Ne x Npk) and coding Rk;
// the child level k+1 has Dn (Ne x Npn) and Rn (Npn x Npk), so that
// Dk ~ Dn * Rn. Atom j of level k pairs row j of Rk (its usage over the coded
// objects) with column j of Rn (its code at the child level).

#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "moecollab/error.hpp"

namespace moecollab::hsdl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace detail {

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }

inline MatrixXd sign(const MatrixXd& m) {
  return m.unaryExpr([](double v) { return sign(v); });
}

inline void check_chain(const MatrixXd& dk, const MatrixXd& dn, const MatrixXd& rk,
                        const MatrixXd& rn) {
  require(dk.rows() == dn.rows(), ErrorCategory::kShape,
          "parent and child dictionaries must share the expert dimension");
  require(rn.rows() == dn.cols(), ErrorCategory::kShape, "child coding rows must match child atoms");
  require(rn.cols() == dk.cols(), ErrorCategory::kShape,
          "child coding must code every parent atom");
  require(rk.rows() == dk.cols(), ErrorCategory::kShape, "parent coding rows must match parent atoms");
}

}  // namespace detail

/// Mean over coded objects (columns) of the L-infinity norm of each code.
inline double loss_sparse(const MatrixXd& r) {
  if (r.size() == 0) return 0.0;
  return r.cwiseAbs().colwise().maxCoeff().sum() / static_cast<double>(r.cols());
}

/// Subgradient of loss_sparse; within a column the unit mass is split evenly
/// among all entries attaining the maximum magnitude.
inline MatrixXd loss_sparse_subgradient(const MatrixXd& r) {
  MatrixXd g = MatrixXd::Zero(r.rows(), r.cols());
  if (r.size() == 0) return g;
  const double inv_cols = 1.0 / static_cast<double>(r.cols());
  for (Eigen::Index i = 0; i < r.cols(); ++i) {
    const double mx = r.col(i).cwiseAbs().maxCoeff();
    Eigen::Index ties = 0;
    for (Eigen::Index p = 0; p < r.rows(); ++p) ties += std::abs(r(p, i)) == mx;
    for (Eigen::Index p = 0; p < r.rows(); ++p) {
      if (std::abs(r(p, i)) == mx) g(p, i) = detail::sign(r(p, i)) * inv_cols / static_cast<double>(ties);
    }
    // At an all-zero column sign() vanishes; the one-sided subgradient on the
    // nonnegative orthant is the even split itself.
    if (mx == 0.0) g.col(i).setConstant(inv_cols / static_cast<double>(ties));
  }
  return g;
}

/// Log-sum-exp surrogate of loss_sparse: mean_i t * log sum_p exp(|r_pi| / t).
/// Converges to loss_sparse as t -> 0.
inline double loss_sparse_smooth(const MatrixXd& r, double temperature) {
  if (r.size() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.cols(); ++i) {
    const VectorXd a = r.col(i).cwiseAbs() / temperature;
    const double mx = a.maxCoeff();
    total += temperature * (mx + std::log((a.array() - mx).exp().sum()));
  }
  return total / static_cast<double>(r.cols());
}

inline MatrixXd loss_sparse_smooth_gradient(const MatrixXd& r, double temperature) {
  MatrixXd g = MatrixXd::Zero(r.rows(), r.cols());
  if (r.size() == 0) return g;
  for (Eigen::Index i = 0; i < r.cols(); ++i) {
    const VectorXd a = r.col(i).cwiseAbs() / temperature;
    const VectorXd w = (a.array() - a.maxCoeff()).exp();
    const VectorXd soft = w / w.sum();
    for (Eigen::Index p = 0; p < r.rows(); ++p) g(p, i) = soft(p) * detail::sign(r(p, i));
  }
  return g / static_cast<double>(r.cols());
}

/// sum_j ||Rn[:, j]||_1 * ||Rk[j, :]||_1 / Npk
inline double loss_hier(const MatrixXd& rk, const MatrixXd& rn) {
  require(rn.cols() == rk.rows(), ErrorCategory::kShape,
          "child coding columns must match parent atoms");
  if (rk.rows() == 0) return 0.0;
  const VectorXd usage = rk.cwiseAbs().rowwise().sum();
  const VectorXd code = rn.cwiseAbs().colwise().sum().transpose();
  return usage.dot(code) / static_cast<double>(rk.rows());
}

struct HierGradient {
  MatrixXd d_rk;
  MatrixXd d_rn;
};

inline HierGradient loss_hier_gradient(const MatrixXd& rk, const MatrixXd& rn) {
  require(rn.cols() == rk.rows(), ErrorCategory::kShape,
          "child coding columns must match parent atoms");
  const double inv_n = rk.rows() ? 1.0 / static_cast<double>(rk.rows()) : 0.0;
  const VectorXd usage = rk.cwiseAbs().rowwise().sum();
  const VectorXd code = rn.cwiseAbs().colwise().sum().transpose();
  HierGradient g;
  g.d_rk = (code.asDiagonal() * detail::sign(rk)) * inv_n;
  g.d_rn = (detail::sign(rn) * usage.asDiagonal()) * inv_n;
  return g;
}

/// sum_j ||Dk[:, j] - (Dn Rn)[:, j]||_1 * ||Rk[j, :]||_1 / Npk
inline double loss_rec(const MatrixXd& dk, const MatrixXd& dn, const MatrixXd& rk,
                       const MatrixXd& rn) {
  detail::check_chain(dk, dn, rk, rn);
  if (dk.cols() == 0) return 0.0;
  const VectorXd usage = rk.cwiseAbs().rowwise().sum();
  const VectorXd resid = (dk - dn * rn).cwiseAbs().colwise().sum().transpose();
  return usage.dot(resid) / static_cast<double>(dk.cols());
}

struct RecGradient {
  MatrixXd d_dk;
  MatrixXd d_dn;
  MatrixXd d_rk;
  MatrixXd d_rn;
};

inline RecGradient loss_rec_gradient(const MatrixXd& dk, const MatrixXd& dn, const MatrixXd& rk,
                                     const MatrixXd& rn) {
  detail::check_chain(dk, dn, rk, rn);
  const double inv_n = dk.cols() ? 1.0 / static_cast<double>(dk.cols()) : 0.0;
  const MatrixXd e = dk - dn * rn;
  const VectorXd usage = rk.cwiseAbs().rowwise().sum();
  const VectorXd resid = e.cwiseAbs().colwise().sum().transpose();
  const MatrixXd weighted = (detail::sign(e) * usage.asDiagonal()) * inv_n;
  RecGradient g;
  g.d_dk = weighted;
  g.d_dn = -weighted * rn.transpose();
  g.d_rn = -dn.transpose() * weighted;
  g.d_rk = (resid.asDiagonal() * detail::sign(rk)) * inv_n;
  return g;
}

/// ||X - D R||_F^2 / (Ne * Ns)
inline double loss_data(const MatrixXd& x, const MatrixXd& d, const MatrixXd& r) {
  require(x.rows() == d.rows() && d.cols() == r.rows() && r.cols() == x.cols(),
          ErrorCategory::kShape, "X, D and R shapes do not chain");
  if (x.size() == 0) return 0.0;
  return (x - d * r).squaredNorm() / static_cast<double>(x.size());
}

struct DataGradient {
  MatrixXd d_d;
  MatrixXd d_r;
};

inline DataGradient loss_data_gradient(const MatrixXd& x, const MatrixXd& d, const MatrixXd& r) {
  require(x.rows() == d.rows() && d.cols() == r.rows() && r.cols() == x.cols(),
          ErrorCategory::kShape, "X, D and R shapes do not chain");
  const double scale = x.size() ? -2.0 / static_cast<double>(x.size()) : 0.0;
  const MatrixXd resid = x - d * r;
  return {scale * resid * r.transpose(), scale * d.transpose() * resid};
}

/// Individual terms of one level's objective.
struct LossTerms {
  double sparse = 0.0;
  double hier = 0.0;
  double rec = 0.0;
  double data = 0.0;
};

/// L_sparse + lambda1 L_hier + lambda2 L_rec + lambda0 L_data.
inline double loss_total(const LossTerms& t, double lambda0, double lambda1, double lambda2) {
  return t.sparse + lambda1 * t.hier + lambda2 * t.rec + lambda0 * t.data;
}

}  // namespace moecollab::hsdl
