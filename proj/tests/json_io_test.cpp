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

#include "fixtures.hpp"
#include "moecollab/json_io.hpp"
#include "test_util.hpp"

namespace moecollab::json_io {
namespace {

TEST(HsdlConfigJson, RoundTripAndDefaults) {
  hsdl::HsdlConfig c;
  c.capacities = {3, 6, 12};
  c.lambda0 = 50;
  c.seed = 123456789012345ULL;
  const auto back = hsdl_config_from_json(to_json(c));
  EXPECT_EQ(back.capacities, c.capacities);
  EXPECT_EQ(back.lambda0, 50);
  EXPECT_EQ(back.seed, c.seed);
  const auto defaults = hsdl_config_from_json(json::object());
  EXPECT_EQ(defaults.capacities, (std::vector<std::size_t>{8, 16}));
  EXPECT_ERROR_CATEGORY(hsdl_config_from_json(json{{"capacities", json::array()}}), ErrorCategory::kConfig);
  EXPECT_ERROR_CATEGORY(hsdl_config_from_json(json::array()), ErrorCategory::kConfig);
}

TEST(HierarchyJson, RoundTripIsExact) {
  const auto t = fixtures::two_tier_data(2);
  hsdl::HsdlConfig cfg;
  cfg.capacities = {4, 8};
  cfg.max_iters = 40;
  HierarchyDoc doc{hsdl::fit_hierarchy(t.data.x.data(), cfg), 1, 64,
                   std::vector<ExpertId>(t.data.x.row_ids().begin(), t.data.x.row_ids().end())};
  const json j = to_json(doc);
  EXPECT_EQ(j["levels"][0]["D"].size(), 64u * 4u);
  const auto back = hierarchy_from_json(json::parse(j.dump()));
  ASSERT_EQ(back.hierarchy.levels.size(), 2u);
  for (std::size_t k = 1; k <= 2; ++k) {
    EXPECT_EQ(back.hierarchy.level(k).d, doc.hierarchy.level(k).d);
    EXPECT_EQ(back.hierarchy.level(k).r, doc.hierarchy.level(k).r);
    EXPECT_EQ(back.hierarchy.level(k).loss_trace, doc.hierarchy.level(k).loss_trace);
  }
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(HierarchyJson, RowMajorLayout) {
  hsdl::Hierarchy h;
  h.num_experts = 2;
  h.num_samples = 3;
  hsdl::DictionaryLevel lvl;
  lvl.d = (Eigen::MatrixXd(2, 1) << 0.6, 0.8).finished();
  lvl.r = (Eigen::MatrixXd(1, 3) << 1, 2, 3).finished();
  h.levels.push_back(lvl);
  const json j = to_json(HierarchyDoc{h, 1, 2, {{0, 0}, {0, 1}}});
  EXPECT_EQ(j["levels"][0]["R"], json({1.0, 2.0, 3.0}));
  EXPECT_EQ(j["levels"][0]["D"], json({0.6, 0.8}));
}

TEST(HierarchyJson, RejectsBrokenDocuments) {
  EXPECT_ERROR_CATEGORY(hierarchy_from_json(json{{"format", "other"}}), ErrorCategory::kFormat);
  hsdl::Hierarchy h;
  h.num_experts = 1;
  h.num_samples = 1;
  hsdl::DictionaryLevel lvl;
  lvl.d = Eigen::MatrixXd::Ones(1, 1);
  lvl.r = Eigen::MatrixXd::Ones(1, 1);
  h.levels.push_back(lvl);
  json j = to_json(HierarchyDoc{h, 1, 1, {{0, 0}}});
  j["levels"][0]["R"] = json::array();
  EXPECT_ERROR_CATEGORY(hierarchy_from_json(j), ErrorCategory::kFormat);
  j = to_json(HierarchyDoc{h, 1, 1, {{0, 0}}});
  j["levels"][0]["k"] = 2;
  EXPECT_ERROR_CATEGORY(hierarchy_from_json(j), ErrorCategory::kFormat);
}

TEST(SynthConfigJson, ExplicitAndRandomPatterns) {
  const auto c = synth_config_from_json(json::parse(R"({
    "num_experts": 10, "num_samples": 5, "patterns": [{"experts": [1, 2]}], "seed": 4})"));
  ASSERT_EQ(c.patterns.size(), 1u);
  EXPECT_EQ(c.patterns[0].weights, (std::vector<double>{1.0, 1.0}));
  const auto r = synth_config_from_json(json::parse(R"({
    "num_experts": 64, "num_samples": 5,
    "random_patterns": {"count": 8, "min_size": 3, "max_size": 5, "seed": 9}})"));
  EXPECT_EQ(r.patterns.size(), 8u);
  EXPECT_ERROR_CATEGORY(synth_config_from_json(json::parse(R"({"num_experts": 2, "num_samples": 1,
    "patterns": [{"experts": [5]}]})")),
                        ErrorCategory::kConfig);
  const auto round = synth_config_from_json(to_json(r));
  EXPECT_EQ(round.patterns.size(), 8u);
  EXPECT_EQ(round.patterns[3].experts, r.patterns[3].experts);
}

TEST(CoactivationJson, RoundTripWithInfiniteThreshold) {
  Eigen::MatrixXd x(3, 4);
  x << 1, 1, 0, 1, 1, 0, 0, 1, 0, 0, 0, 0;
  const auto t = mining::exhaustive_coactivation(x, mining::percentile_threshold(x), 2);
  const json j = to_json(t, std::vector<ExpertId>{{0, 0}, {0, 1}, {0, 2}});
  EXPECT_TRUE(j["threshold"][2].is_null());
  EXPECT_EQ(j["entries"][0]["layer_expert"], json::parse("[[0,0],[0,1]]"));
  const auto back = coactivation_from_json(json::parse(j.dump()));
  EXPECT_TRUE(std::isinf(back.threshold(2)));
  ASSERT_EQ(back.entries.size(), t.entries.size());
  for (std::size_t q = 0; q < t.entries.size(); ++q) {
    EXPECT_EQ(back.entries[q].members, t.entries[q].members);
    EXPECT_EQ(back.entries[q].count, t.entries[q].count);
  }
}

TEST(MaskJson, Fields) {
  Eigen::MatrixXd d(3, 2), r(2, 2);
  d << 1, 0, 0, 1, 0.5, 0.5;
  r << 1, 1, 0, 1;
  const auto m = caep::prune(d, r, 0.34, 0.5);
  const json j = to_json(m, std::vector<ExpertId>{{0, 0}, {0, 1}, {1, 0}});
  EXPECT_EQ(j["mask"], json({1, 0, 0}));
  EXPECT_EQ(j["kept"], json({0}));
  EXPECT_EQ(j["kept_layer_expert"], json::parse("[[0,0]]"));
  EXPECT_EQ(j["trace"], json({2}));
  EXPECT_EQ(j["scores"], json({2.0, 1.0, 1.5}));
}

TEST(ProfilesJson, UndefinedIsNull) {
  std::vector<mining::DomainProfile> p = {{"a", Eigen::VectorXd::Zero(2), 1, 0, true},
                                          {"b", (Eigen::VectorXd(2) << 1, 0).finished(), 1, 1, false}};
  const auto sim = mining::similarity_matrix(std::span<const mining::DomainProfile>(p));
  const json j = profiles_json(p, sim);
  EXPECT_TRUE(j["similarity"][0][1].is_null());
  EXPECT_EQ(j["similarity"][1][1], 1.0);
}

}  // namespace
}  // namespace moecollab::json_io
