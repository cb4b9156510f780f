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

#include "moecollab/error.hpp"

namespace moecollab::metrics {

/// (acc_pruned - acc_base) / acc_base
inline double relative_change(double acc_pruned, double acc_base) {
  require(acc_base > 0.0, ErrorCategory::kConfig, "baseline accuracy must be positive");
  return (acc_pruned - acc_base) / acc_base;
}

// DeepSeek-MoE-16B parameter budget, billions: embeddings 0.2, attention 0.4,
// gate + shared experts 0.9, routed experts 14.7, output layer 0.2.
inline constexpr double kDeepSeekMoe16bTotal = 16.4;
inline constexpr double kDeepSeekMoe16bRouted = 14.7;

/// Total parameters (billions) left after removing k% of the routed experts.
inline double pruned_param_count(double k_percent) {
  require(k_percent >= 0.0 && k_percent <= 100.0, ErrorCategory::kConfig,
          "pruning percentage must lie in [0, 100]");
  return kDeepSeekMoe16bTotal - kDeepSeekMoe16bRouted * (k_percent / 100.0);
}

}  // namespace moecollab::metrics
