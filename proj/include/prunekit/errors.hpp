// Copyright 2026 The PruneKit Authors. All Rights Reserved.
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

namespace prunekit {

// Error categories double as process exit codes (see README).
enum class ErrorCategory : int {
  internal = 1,
  usage = 2,
  io = 3,
  format = 4,
  infeasible = 5,
  divergence = 6,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::infeasible: return "infeasible";
    case ErrorCategory::divergence: return "divergence";
    case ErrorCategory::internal: break;
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

// Incompatible tensor or layer dimensions.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error(ErrorCategory::usage, message) {}
};

// Bad argument values (out-of-range factors, invalid counts, unknown keys).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorCategory::usage, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorCategory::io, message) {}
};

// Malformed file contents (magic/version mismatch, truncated payload).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error(ErrorCategory::format, message) {}
};

// A search ended with no candidate satisfying its constraint.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& message) : Error(ErrorCategory::infeasible, message) {}
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& message) : Error(ErrorCategory::divergence, message) {}
};

}  // namespace prunekit
