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
#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moecollab/error.hpp"

namespace moecollab {

enum class Granularity : std::uint8_t { kSentence = 0, kToken = 1 };

/// Position of one expert inside the model: (layer j, expert k).
struct ExpertId {
  std::uint32_t layer = 0;
  std::uint32_t expert = 0;

  auto operator<=>(const ExpertId&) const = default;
};

/// Upper bound slack on the per-token, per-layer routing mass.
inline constexpr double kRoutingSumSlack = 1e-5;

/// Router weights captured from an MoE model.
///
/// Sentence granularity stores one row per sample (Ns x m x n); token
/// granularity stores one row per token, grouped by sample, with
/// `token_counts()[i]` rows for sample i. Values are float32 because that is
/// what the MOEACT payload carries; the tensor is immutable once built and
/// every constructor path validates the invariants.
class ActivationTensor {
 public:
  ActivationTensor() = default;

  static ActivationTensor sentence(std::size_t num_samples, std::size_t num_layers,
                                   std::size_t experts_per_layer, std::vector<float> values,
                                   std::vector<std::uint32_t> token_counts = {}) {
    ActivationTensor t;
    t.granularity_ = Granularity::kSentence;
    t.num_samples_ = num_samples;
    t.num_layers_ = num_layers;
    t.experts_per_layer_ = experts_per_layer;
    t.values_ = std::move(values);
    t.token_counts_ = std::move(token_counts);
    require(t.token_counts_.empty() || t.token_counts_.size() == num_samples,
            ErrorCategory::kFormat, "token_counts must have one entry per sample");
    t.check_payload_size();
    t.validate();
    return t;
  }

  static ActivationTensor token(std::size_t num_layers, std::size_t experts_per_layer,
                                std::vector<std::uint32_t> token_counts,
                                std::vector<float> values) {
    ActivationTensor t;
    t.granularity_ = Granularity::kToken;
    t.num_samples_ = token_counts.size();
    t.num_layers_ = num_layers;
    t.experts_per_layer_ = experts_per_layer;
    t.token_counts_ = std::move(token_counts);
    t.values_ = std::move(values);
    t.check_payload_size();
    t.validate();
    return t;
  }

  Granularity granularity() const noexcept { return granularity_; }
  bool is_token() const noexcept { return granularity_ == Granularity::kToken; }
  std::size_t num_samples() const noexcept { return num_samples_; }
  std::size_t num_layers() const noexcept { return num_layers_; }
  std::size_t experts_per_layer() const noexcept { return experts_per_layer_; }
  std::size_t num_experts() const noexcept { return num_layers_ * experts_per_layer_; }
  std::span<const std::uint32_t> token_counts() const noexcept { return token_counts_; }
  bool has_token_counts() const noexcept { return !token_counts_.empty(); }
  std::span<const float> values() const noexcept { return values_; }

  /// Number of stored rows: Ns for sentence tensors, total tokens otherwise.
  std::size_t num_rows() const noexcept {
    return num_experts() == 0 ? 0 : values_.size() / num_experts();
  }

  /// All m*n weights of one row, layer-major.
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(values_).subspan(r * num_experts(), num_experts());
  }

  float at(std::size_t r, std::size_t layer, std::size_t expert) const {
    return values_[r * num_experts() + layer * experts_per_layer_ + expert];
  }

  /// First token row of sample i (token granularity).
  std::size_t token_offset(std::size_t sample) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < sample; ++i) off += token_counts_[i];
    return off;
  }

 private:
  static std::size_t total_tokens(std::span<const std::uint32_t> counts) {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  }

  void check_payload_size() const {
    const std::size_t rows = is_token() ? total_tokens(token_counts_) : num_samples_;
    require(values_.size() == rows * num_experts(), ErrorCategory::kFormat,
            "payload holds " + std::to_string(values_.size()) + " values, expected " +
                std::to_string(rows * num_experts()));
  }

  void validate() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const float v = values_[i];
      require(std::isfinite(v) && v >= 0.0f, ErrorCategory::kInvalidValue,
              "activation value at flat index " + std::to_string(i) +
                  " is negative or non-finite");
    }
    const std::size_t n = experts_per_layer_;
    if (is_token()) {
      for (std::size_t r = 0; r < num_rows(); ++r) {
        for (std::size_t j = 0; j < num_layers_; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < n; ++k) s += at(r, j, k);
          require(s <= 1.0 + kRoutingSumSlack, ErrorCategory::kInvalidValue,
                  "token row " + std::to_string(r) + " layer " + std::to_string(j) +
                      " routes mass " + std::to_string(s) + " > 1");
        }
      }
    } else if (has_token_counts()) {
      for (std::size_t i = 0; i < num_samples_; ++i) {
        const double cap = token_counts_[i] * (1.0 + kRoutingSumSlack);
        for (float v : row(i)) {
          require(v <= cap, ErrorCategory::kInvalidValue,
                  "sentence value exceeds token count of sample " + std::to_string(i));
        }
      }
    }
  }

  Granularity granularity_ = Granularity::kSentence;
  std::size_t num_samples_ = 0;
  std::size_t num_layers_ = 0;
  std::size_t experts_per_layer_ = 0;
  std::vector<std::uint32_t> token_counts_;
  std::vector<float> values_;
};

/// Ne x Ns matrix X. Row r carries the identity of the expert it describes so
/// that reduced (masked) matrices keep their original (layer, expert) labels.
class ExpertActivationMatrix {
 public:
  ExpertActivationMatrix() = default;

  /// Full matrix with layer-major rows: row j*n + k is (layer j, expert k).
  ExpertActivationMatrix(Eigen::MatrixXd data, std::size_t num_layers,
                         std::size_t experts_per_layer)
      : data_(std::move(data)), num_layers_(num_layers), experts_per_layer_(experts_per_layer) {
    require(static_cast<std::size_t>(data_.rows()) == num_layers * experts_per_layer,
            ErrorCategory::kShape, "matrix rows must equal layers * experts_per_layer");
    row_ids_.reserve(data_.rows());
    for (std::size_t j = 0; j < num_layers; ++j)
      for (std::size_t k = 0; k < experts_per_layer; ++k)
        row_ids_.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k)});
    validate();
  }

  /// Matrix over an explicit subset of experts (e.g. after masking).
  ExpertActivationMatrix(Eigen::MatrixXd data, std::size_t num_layers,
                         std::size_t experts_per_layer, std::vector<ExpertId> row_ids)
      : data_(std::move(data)),
        num_layers_(num_layers),
        experts_per_layer_(experts_per_layer),
        row_ids_(std::move(row_ids)) {
    require(static_cast<std::size_t>(data_.rows()) == row_ids_.size(), ErrorCategory::kShape,
            "one expert id is required per matrix row");
    for (const auto& id : row_ids_) {
      require(id.layer < num_layers && id.expert < experts_per_layer, ErrorCategory::kShape,
              "expert id outside the layer layout");
    }
    validate();
  }

  /// Single-layer layout, used for synthetic matrices.
  static ExpertActivationMatrix flat(Eigen::MatrixXd data) {
    const auto rows = static_cast<std::size_t>(data.rows());
    return ExpertActivationMatrix(std::move(data), 1, rows);
  }

  const Eigen::MatrixXd& data() const noexcept { return data_; }
  std::size_t num_experts() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t num_samples() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  std::size_t num_layers() const noexcept { return num_layers_; }
  std::size_t experts_per_layer() const noexcept { return experts_per_layer_; }
  std::span<const ExpertId> row_ids() const noexcept { return row_ids_; }
  ExpertId expert_of(std::size_t row) const { return row_ids_.at(row); }
  bool degenerate() const noexcept { return data_.rows() == 0; }

  std::optional<std::size_t> row_of(ExpertId id) const {
    auto it = std::find(row_ids_.begin(), row_ids_.end(), id);
    if (it == row_ids_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - row_ids_.begin());
  }

 private:
  void validate() const {
    require(data_.allFinite() && (data_.size() == 0 || data_.minCoeff() >= 0.0),
            ErrorCategory::kInvalidValue, "activation matrix must be finite and nonnegative");
  }

  Eigen::MatrixXd data_;
  std::size_t num_layers_ = 0;
  std::size_t experts_per_layer_ = 0;
  std::vector<ExpertId> row_ids_;
};

inline std::size_t flat_row(ExpertId id, std::size_t experts_per_layer) {
  return static_cast<std::size_t>(id.layer) * experts_per_layer + id.expert;
}

inline ExpertId expert_at_row(std::size_t row, std::size_t experts_per_layer) {
  return {static_cast<std::uint32_t>(row / experts_per_layer),
          static_cast<std::uint32_t>(row % experts_per_layer)};
}

/// v_{i,j,k} = sum over the sample's tokens of the routing weight.
inline ActivationTensor aggregate_tokens(const ActivationTensor& tokens) {
  require(tokens.is_token(), ErrorCategory::kFormat,
          "aggregate_tokens expects a token-granularity tensor");
  const std::size_t ne = tokens.num_experts();
  std::vector<float> out(tokens.num_samples() * ne, 0.0f);
  std::vector<double> acc(ne);
  std::size_t r = 0;
  for (std::size_t i = 0; i < tokens.num_samples(); ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::uint32_t t = 0; t < tokens.token_counts()[i]; ++t, ++r) {
      const auto row = tokens.row(r);
      for (std::size_t e = 0; e < ne; ++e) acc[e] += row[e];
    }
    for (std::size_t e = 0; e < ne; ++e) out[i * ne + e] = static_cast<float>(acc[e]);
  }
  const auto counts = tokens.token_counts();
  return ActivationTensor::sentence(tokens.num_samples(), tokens.num_layers(),
                                    tokens.experts_per_layer(), std::move(out),
                                    std::vector<std::uint32_t>(counts.begin(), counts.end()));
}

/// X[j*n + k, i] = v_{i,j,k}; with `normalize`, column i is divided by T_i.
inline ExpertActivationMatrix flatten_to_matrix(const ActivationTensor& sentences,
                                                bool normalize = false) {
  require(!sentences.is_token(), ErrorCategory::kFormat,
          "flatten_to_matrix expects a sentence-granularity tensor; aggregate tokens first");
  require(!normalize || sentences.has_token_counts(), ErrorCategory::kConfig,
          "normalization needs per-sample token counts");
  const std::size_t ne = sentences.num_experts();
  const std::size_t ns = sentences.num_samples();
  Eigen::MatrixXd x(ne, ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const auto row = sentences.row(i);
    double scale = 1.0;
    if (normalize) {
      const auto t = sentences.token_counts()[i];
      scale = t > 0 ? 1.0 / t : 0.0;
    }
    for (std::size_t e = 0; e < ne; ++e) x(e, i) = static_cast<double>(row[e]) * scale;
  }
  return ExpertActivationMatrix(std::move(x), sentences.num_layers(),
                                sentences.experts_per_layer());
}

/// One domain tag per sample.
class DomainLabels {
 public:
  DomainLabels() = default;
  explicit DomainLabels(std::vector<std::string> per_sample) : labels_(std::move(per_sample)) {
    require(!labels_.empty(), ErrorCategory::kConfig, "domain label set is empty");
    for (const auto& l : labels_)
      require(!l.empty(), ErrorCategory::kConfig, "empty domain label");
    domains_ = labels_;
    std::sort(domains_.begin(), domains_.end());
    domains_.erase(std::unique(domains_.begin(), domains_.end()), domains_.end());
  }

  std::size_t num_samples() const noexcept { return labels_.size(); }
  const std::string& domain_of(std::size_t sample) const { return labels_.at(sample); }
  /// Distinct labels, sorted.
  std::span<const std::string> domains() const noexcept { return domains_; }
  std::span<const std::string> per_sample() const noexcept { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> domains_;
};

}  // namespace moecollab
