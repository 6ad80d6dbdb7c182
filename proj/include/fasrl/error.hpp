// Copyright 2026 The fasrl Authors
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

namespace fasrl {

// Failure categories surface verbatim in CLI diagnostics.
enum class ErrorCategory {
  kConfig,
  kDimension,
  kArgument,
  kDataset,
  kCheckpoint,
  kNumeric,
  kIo,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kDimension: return "dimension";
    case ErrorCategory::kArgument: return "argument";
    case ErrorCategory::kDataset: return "dataset";
    case ErrorCategory::kCheckpoint: return "checkpoint";
    case ErrorCategory::kNumeric: return "numeric";
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

}  // namespace fasrl
