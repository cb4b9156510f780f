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

// MOEACT v1 container and the JSON-lines domain label sidecar.
//
//   "MOEA" | u32 version=1 | u8 granularity | 3 zero bytes | u32 Ns | u32 m | u32 n
//   | token only: Ns x u32 token counts | float32 payload, sample-major,
//   then token, then layer, then expert. All integers and floats little-endian.

#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "moecollab/activation.hpp"
#include "moecollab/error.hpp"

namespace moecollab::moeact {

inline constexpr std::array<char, 4> kMagic = {'M', 'O', 'E', 'A'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 4 + 1 + 3 + 12;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  require(v <= std::numeric_limits<std::uint32_t>::max(), ErrorCategory::kFormat,
          std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const ActivationTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * (t.token_counts().size() + t.values().size()));
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  detail::put_u32(out, kVersion);
  out.push_back(static_cast<std::uint8_t>(t.granularity()));
  out.insert(out.end(), 3, 0);
  detail::put_u32(out, detail::checked_u32(t.num_samples(), "Ns"));
  detail::put_u32(out, detail::checked_u32(t.num_layers(), "m"));
  detail::put_u32(out, detail::checked_u32(t.experts_per_layer(), "n"));
  if (t.is_token()) {
    for (auto c : t.token_counts()) detail::put_u32(out, c);
  }
  for (float v : t.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline ActivationTensor decode(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4, ErrorCategory::kTruncated, "file shorter than the magic bytes");
  require(std::memcmp(bytes.data(), kMagic.data(), 4) == 0, ErrorCategory::kBadMagic,
          "not a MOEACT file (bad magic)");
  require(bytes.size() >= kHeaderBytes, ErrorCategory::kTruncated, "header is truncated");
  const std::uint8_t* p = bytes.data();
  const std::uint32_t version = detail::get_u32(p + 4);
  require(version == kVersion, ErrorCategory::kUnsupportedVersion,
          "unsupported MOEACT version " + std::to_string(version));
  const std::uint8_t gran = p[8];
  require(gran <= 1, ErrorCategory::kFormat, "unknown granularity byte " + std::to_string(gran));
  require(p[9] == 0 && p[10] == 0 && p[11] == 0, ErrorCategory::kFormat,
          "header padding must be zero");
  const std::uint64_t ns = detail::get_u32(p + 12);
  const std::uint64_t m = detail::get_u32(p + 16);
  const std::uint64_t n = detail::get_u32(p + 20);
  std::size_t pos = kHeaderBytes;
  const std::uint64_t available = bytes.size();

  std::vector<std::uint32_t> counts;
  std::uint64_t rows = ns;
  if (gran == 1) {
    require(available - pos >= 4 * ns, ErrorCategory::kTruncated, "token count table is truncated");
    counts.resize(ns);
    rows = 0;
    for (std::uint64_t i = 0; i < ns; ++i, pos += 4) {
      counts[i] = detail::get_u32(p + pos);
      rows += counts[i];
    }
  }
  const std::uint64_t ne = m * n;
  require(ne == 0 || rows <= std::numeric_limits<std::uint64_t>::max() / 4 / ne,
          ErrorCategory::kFormat, "header dimensions overflow");
  const std::uint64_t expected = rows * ne * 4;
  require(available - pos >= expected, ErrorCategory::kTruncated,
          "payload is truncated: " + std::to_string(available - pos) + " bytes, expected " +
              std::to_string(expected));
  require(available - pos == expected, ErrorCategory::kFormat, "trailing bytes after payload");

  std::vector<float> values(rows * ne);
  for (auto& v : values) {
    v = std::bit_cast<float>(detail::get_u32(p + pos));
    pos += 4;
  }
  if (gran == 1) return ActivationTensor::token(m, n, std::move(counts), std::move(values));
  return ActivationTensor::sentence(ns, m, n, std::move(values));
}

inline void write(const ActivationTensor& t, const std::filesystem::path& path) {
  const auto bytes = encode(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorCategory::kIo, "cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(os), ErrorCategory::kIo, "write failed for " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCategory::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {});
}

inline ActivationTensor read(const std::filesystem::path& path) { return decode(read_bytes(path)); }

/// Writes X as a sentence-granularity tensor (layer layout taken from X).
inline ActivationTensor tensor_from_matrix(const ExpertActivationMatrix& x) {
  require(x.num_experts() == x.num_layers() * x.experts_per_layer(), ErrorCategory::kShape,
          "only full (unmasked) matrices map back to a tensor");
  const std::size_t ne = x.num_experts();
  std::vector<float> values(ne * x.num_samples());
  for (std::size_t i = 0; i < x.num_samples(); ++i)
    for (std::size_t e = 0; e < ne; ++e) values[i * ne + e] = static_cast<float>(x.data()(e, i));
  return ActivationTensor::sentence(x.num_samples(), x.num_layers(), x.experts_per_layer(),
                                    std::move(values));
}

// --- domain label sidecar ---------------------------------------------------

inline DomainLabels parse_labels(std::istream& is) {
  std::vector<std::string> labels;
  std::vector<bool> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCategory::kFormat, "labels line " + std::to_string(lineno) + ": " + e.what());
    }
    require(j.is_object() && j.contains("sample") && j["sample"].is_number_unsigned() &&
                j.contains("domain") && j["domain"].is_string(),
            ErrorCategory::kFormat,
            "labels line " + std::to_string(lineno) + " needs {\"sample\": n, \"domain\": s}");
    const auto idx = j["sample"].get<std::size_t>();
    if (idx >= labels.size()) {
      labels.resize(idx + 1);
      seen.resize(idx + 1, false);
    }
    require(!seen[idx], ErrorCategory::kFormat, "duplicate label for sample " + std::to_string(idx));
    seen[idx] = true;
    labels[idx] = j["domain"].get<std::string>();
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    require(seen[i], ErrorCategory::kFormat, "missing label for sample " + std::to_string(i));
  return DomainLabels(std::move(labels));
}

inline DomainLabels read_labels(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCategory::kIo, "cannot open " + path.string());
  return parse_labels(is);
}

inline void write_labels(const DomainLabels& labels, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorCategory::kIo, "cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < labels.num_samples(); ++i) {
    os << nlohmann::json{{"sample", i}, {"domain", labels.domain_of(i)}}.dump() << '\n';
  }
}

}  // namespace moecollab::moeact
