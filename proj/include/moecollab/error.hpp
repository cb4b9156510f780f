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

#include <stdexcept>
#include <string>
#include <string_view>

namespace moecollab {

/// Machine-readable failure categories. The CLI prints the category name on
/// stderr and maps each one to its own exit code.
enum class ErrorCategory {
  kFormat = 1,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kInvalidValue,
  kShape,
  kConfig,
  kNumerical,
  kUndefined,
  kIo,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kBadMagic: return "bad_magic";
    case ErrorCategory::kUnsupportedVersion: return "unsupported_version";
    case ErrorCategory::kTruncated: return "truncated";
    case ErrorCategory::kInvalidValue: return "invalid_value";
    case ErrorCategory::kShape: return "shape";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kNumerical: return "numerical";
    case ErrorCategory::kUndefined: return "undefined";
    case ErrorCategory::kIo: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& msg) {
  throw Error(c, msg);
}

inline void require(bool cond, ErrorCategory c, const std::string& msg) {
  if (!cond) fail(c, msg);
}

}  // namespace moecollab
