// Copyright 2026 The kinetic-ergo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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

#include <json.hpp>

namespace kergo {

enum class ErrorCode {
  kDimensionMismatch,
  kMissingMeasure,
  kInvalidArgument,
  kDegenerateSampling,
  kInteractionBudgetExhausted,
  kNotHurwitz,
  kSingularCovariance,
  kDivergence,
  kUnequalCounts,
  kSizeCap,
  kInsufficientPoints,
  kNonContraction,
  kKbUnderdeclared,
  kNonFinite,
  kSchema,
  kNoneFound,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `detail()` carries structured context such as a
/// falsification witness, the first divergent step, or a gap history.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kMissingMeasure: return "missing measure";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDegenerateSampling: return "degenerate sampling";
    case ErrorCode::kInteractionBudgetExhausted: return "interaction budget exhausted";
    case ErrorCode::kNotHurwitz: return "drift matrix not Hurwitz";
    case ErrorCode::kSingularCovariance: return "singular covariance";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kUnequalCounts: return "unequal sample counts";
    case ErrorCode::kSizeCap: return "size cap exceeded";
    case ErrorCode::kInsufficientPoints: return "insufficient points";
    case ErrorCode::kNonContraction: return "non-contraction";
    case ErrorCode::kKbUnderdeclared: return "K_b underdeclared";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kSchema: return "schema violation";
    case ErrorCode::kNoneFound: return "none found";
    case ErrorCode::kIo: return "i/o failure";
  }
  return "unknown";
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace kergo
