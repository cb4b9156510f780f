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

#include <gtest/gtest.h>

#include <random>

#include "moecollab/caep.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace moecollab::caep {
namespace {

MatrixXd worked_d() {
  MatrixXd d(3, 2);
  d << 1, 0, 0, 1, 0.5, 0.5;
  return d;
}

MatrixXd worked_r() {
  MatrixXd r(2, 2);
  r << 1, 1, 0, 1;
  return r;
}

std::vector<std::uint8_t> bytes(std::initializer_list<int> v) { return {v.begin(), v.end()}; }

std::vector<std::vector<double>> rows_of(const MatrixXd& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  return out;
}

TEST(ContributionScores, WorkedExample) {
  const auto s = contribution_scores(worked_d(), worked_r());
  EXPECT_EQ(s.r_sum, (VectorXd(2) << 2, 1).finished());
  EXPECT_EQ(s.e, (VectorXd(3) << 2, 1, 1.5).finished());
}

TEST(ContributionScores, ZeroAndIdentity) {
  EXPECT_TRUE(contribution_scores(worked_d(), MatrixXd::Zero(2, 5)).e.isZero());
  MatrixXd r(3, 2);
  r << 1, 2, 0.5, 0, 0, 3;
  EXPECT_EQ(contribution_scores(MatrixXd::Identity(3, 3), r).e, r.rowwise().sum());
}

TEST(ContributionScores, Errors) {
  MatrixXd r = worked_r();
  r(1, 0) = -0.1;
  EXPECT_ERROR_CATEGORY(contribution_scores(worked_d(), r), ErrorCategory::kInvalidValue);
  EXPECT_ERROR_CATEGORY(contribution_scores(worked_d(), MatrixXd::Ones(3, 2)), ErrorCategory::kShape);
}

TEST(ThresholdMask, Examples) {
  const VectorXd e = (VectorXd(3) << 2, 1, 1.5).finished();
  const auto t = threshold_mask(e, 0.34);
  EXPECT_EQ(t.rank, 2u);
  EXPECT_DOUBLE_EQ(t.f, 1.5);
  EXPECT_EQ(t.mask, bytes({1, 0, 1}));

  EXPECT_EQ(threshold_mask(VectorXd::Constant(4, 0.7), 0.25).mask, bytes({1, 1, 1, 1}));
  const auto hi = threshold_mask(e, 0.999);
  EXPECT_DOUBLE_EQ(hi.f, 1.0);
  EXPECT_EQ(hi.mask, bytes({1, 1, 1}));
}

TEST(ThresholdMask, Errors) {
  EXPECT_ERROR_CATEGORY(threshold_mask(VectorXd(), 0.5), ErrorCategory::kShape);
  EXPECT_ERROR_CATEGORY(threshold_mask(VectorXd::Ones(2), 1.5), ErrorCategory::kConfig);
}

TEST(Prune, NoPruningNeeded) {
  const auto m = prune(worked_d(), worked_r(), 0.34, 1.0 / 3.0);
  EXPECT_EQ(m.mask, bytes({1, 0, 1}));
  EXPECT_TRUE(m.trace.empty());
}

TEST(Prune, WorkedExample) {
  const auto m = prune(worked_d(), worked_r(), 0.34, 0.5);
  EXPECT_DOUBLE_EQ(m.f, 1.5);
  EXPECT_EQ(m.mask, bytes({1, 0, 0}));
  EXPECT_EQ(m.trace, std::vector<std::size_t>{2});
  ASSERT_EQ(m.score_history.size(), 1u);
  EXPECT_EQ(m.score_history[0], (VectorXd(3) << 2, 0, 1).finished());
  EXPECT_EQ(m.kept, std::vector<std::size_t>{0});
  EXPECT_FALSE(m.fallback_used);
}

TEST(Prune, SmallK2LeavesMaskUntouched) {
  const auto m = prune(worked_d(), worked_r(), 0.34, 1e-6);
  EXPECT_EQ(m.mask, threshold_mask(m.initial_scores, 0.34).mask);
  EXPECT_TRUE(m.trace.empty());
}

TEST(Prune, FallbackKeepsTopExperts) {
  MatrixXd d(4, 1), r(1, 1);
  d << 1, 0, 0, 0;
  r << 1;
  // All experts tie at e >= f = 0, so removing the only pattern cannot help.
  const auto m = prune(d, r, 0.9, 0.5);
  EXPECT_TRUE(m.fallback_used);
  EXPECT_EQ(m.mask, bytes({1, 1, 0, 0}));
  const auto nf = prune(d, r, 0.9, 0.5, false);
  EXPECT_FALSE(nf.fallback_used);
  EXPECT_EQ(nf.mask, bytes({1, 1, 1, 1}));
}

TEST(Prune, RangeErrors) {
  EXPECT_ERROR_CATEGORY(prune(worked_d(), worked_r(), 0.0, 0.5), ErrorCategory::kConfig);
  EXPECT_ERROR_CATEGORY(prune(worked_d(), worked_r(), 0.5, 1.0), ErrorCategory::kConfig);
}

struct Instance {
  MatrixXd d, r;
  double k1, k2;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ne_d(1, 12), np_d(1, 6), ns_d(1, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int ne = ne_d(rng), np = np_d(rng), ns = ns_d(rng);
  // Sparse entries produce ties in e and in R_sum.
  auto sparse = [&] { return u(rng) < 0.4 ? 0.0 : std::round(u(rng) * 4.0) / 4.0; };
  Instance in{MatrixXd::NullaryExpr(ne, np, sparse), MatrixXd::NullaryExpr(np, ns, sparse), 0, 0};
  in.k1 = 0.01 + 0.98 * u(rng);
  in.k2 = 0.01 + 0.98 * u(rng);
  return in;
}

TEST(Prune, MatchesReferenceImplementation) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto in = random_instance(rng);
    const auto got = prune(in.d, in.r, in.k1, in.k2);
    const auto want = oracle::reference_prune(rows_of(in.d), rows_of(in.r), in.k1, in.k2);
    ASSERT_EQ(std::vector<int>(got.mask.begin(), got.mask.end()), want.mask) << "trial " << trial;
    ASSERT_EQ(got.trace, want.trace) << "trial " << trial;
  }
}

TEST(Prune, Invariants) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto in = random_instance(rng);
    const auto m = prune(in.d, in.r, in.k1, in.k2);
    EXPECT_LE(m.trace.size(), static_cast<std::size_t>(in.d.cols()));
    EXPECT_LE(mask_count(m.mask), keep_budget(m.ne, in.k2));
    EXPECT_EQ(m.kept, kept_indices(m.mask));

    // e = D * R_sum after each removal, and scores only decrease.
    VectorXd rsum = in.r.rowwise().sum();
    VectorXd prev = m.initial_scores;
    EXPECT_LT((prev - in.d * rsum).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + rsum.sum()));
    std::size_t prev_count = mask_count(mask_at_least(prev, m.f));
    for (std::size_t s = 0; s < m.score_history.size(); ++s) {
      rsum(static_cast<Eigen::Index>(m.trace[s] - 1)) = 0.0;
      const VectorXd& e = m.score_history[s];
      EXPECT_LT((e - in.d * rsum).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + rsum.sum()));
      EXPECT_TRUE((e.array() <= prev.array()).all());
      const auto c = mask_count(mask_at_least(e, m.f));
      EXPECT_LE(c, prev_count);
      prev = e;
      prev_count = c;
    }
  }
}

TEST(KeepBudget, SnapsIntegralBounds) {
  EXPECT_EQ(keep_budget(3, 1.0 / 3.0), 2u);
  EXPECT_EQ(keep_budget(4, 0.5), 2u);
  EXPECT_EQ(keep_budget(5, 0.5), 3u);
  EXPECT_EQ(keep_budget(10, 0.25), 8u);
}

TEST(ApplyMask, Examples) {
  MatrixXd x(4, 3);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  const ExpertActivationMatrix m(x, 2, 2);
  EXPECT_EQ(apply_mask(m, bytes({1, 1, 1, 1})).data(), x);

  const auto one = apply_mask(m, bytes({1, 0, 0, 0}));
  EXPECT_EQ(one.num_experts(), 1u);
  EXPECT_EQ(one.data().row(0), x.row(0));
  EXPECT_EQ(one.expert_of(0), (ExpertId{0, 0}));

  const auto later = apply_mask(m, bytes({0, 0, 0, 1}));
  EXPECT_EQ(later.expert_of(0), (ExpertId{1, 1}));

  const auto none = apply_mask(m, bytes({0, 0, 0, 0}));
  EXPECT_TRUE(none.degenerate());
  EXPECT_EQ(none.num_samples(), 3u);

  EXPECT_ERROR_CATEGORY(apply_mask(m, bytes({1, 0})), ErrorCategory::kShape);
}

TEST(ApplyMask, Tensor) {
  const auto t = ActivationTensor::sentence(1, 2, 2, {0.5f, 0.5f, 1.0f, 0.0f});
  const auto x = apply_mask(t, bytes({0, 1, 1, 0}));
  EXPECT_EQ(x.num_experts(), 2u);
  EXPECT_EQ(x.expert_of(1), (ExpertId{1, 0}));
  EXPECT_DOUBLE_EQ(x.data()(1, 0), 1.0);
}

}  // namespace
}  // namespace moecollab::caep
