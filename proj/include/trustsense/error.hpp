// Copyright 2026 The trustsense Authors.
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

namespace trustsense {

enum class ErrorKind {
  kInvalidSignal,
  kUndefinedSpectrum,
  kEmptyBand,
  kUndefinedCorrelation,
  kInvalidWindow,
  kSchema,
  kParameter,
  kParse,
  kLabel,
  kBalance,
  kSplit,
  kPartition,
  kShape,
  kBuild,
  kTraining,
  kEstimator,
  kNumeric,
  kEvaluation,
  kLeakage,
  kIo,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidSignal: return "invalid-signal";
    case ErrorKind::kUndefinedSpectrum: return "undefined-spectrum";
    case ErrorKind::kEmptyBand: return "empty-band";
    case ErrorKind::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorKind::kInvalidWindow: return "invalid-window";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kLabel: return "label";
    case ErrorKind::kBalance: return "balance";
    case ErrorKind::kSplit: return "split";
    case ErrorKind::kPartition: return "partition";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kBuild: return "build";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kEstimator: return "estimator";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kEvaluation: return "evaluation";
    case ErrorKind::kLeakage: return "leakage";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

// All library failures are reported as trustsense::Error carrying a kind so
// callers (and tests) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace trustsense
