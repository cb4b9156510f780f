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

// Run manifests. Needs libcrypto (OpenSSL) for SHA-256.

#pragma once

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "moecollab/error.hpp"
#include "moecollab/moeact_io.hpp"

namespace moecollab {

inline constexpr const char* kToolVersion = "0.3.0";

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  require(ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1 &&
              EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) == 1 &&
              EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) == 1,
          ErrorCategory::kIo, "SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

struct InputDigest {
  std::string path;
  std::string sha256;
  std::size_t bytes = 0;
};

inline InputDigest digest_file(const std::filesystem::path& path) {
  const auto bytes = moeact::read_bytes(path);
  return {path.string(), sha256_hex(bytes), bytes.size()};
}

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<InputDigest> inputs;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  double duration_seconds = 0.0;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    nlohmann::json in = nlohmann::json::array();
    for (const auto& d : inputs) in.push_back({{"path", d.path}, {"sha256", d.sha256}, {"bytes", d.bytes}});
    return {{"format", "moecollab.manifest"},
            {"command", command},
            {"config", config},
            {"inputs", in},
            {"seed", seed},
            {"tool_version", tool_version},
            {"outputs", outputs},
            {"duration_seconds", duration_seconds}};
  }
};

}  // namespace moecollab
