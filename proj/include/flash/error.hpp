// Copyright 2026 The flash authors
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

namespace flash {

enum class ErrorCode {
  kInvalidSpec,
  kInvalidArgument,
  kPathCountExceedsLimit,
  kUnknownAlgorithm,
  kEdgeViolation,
  kEmptyPathSet,
  kDimensionMismatch,
  kNonSymmetricInput,
  kEmptyHistory,
  kStepTimeout,
  kExecutorFailure,
  kHandshakeFailure,
  kProtocolViolation,
  kWorkerExited,
  kBudgetTooSmall,
  kConfigParse,
  kTraceParse,
  kIo,
  kInterrupted,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// C API can map it onto a status value without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class PathCountExceedsLimit : public Error {
 public:
  PathCountExceedsLimit(double total, std::size_t limit)
      : Error(ErrorCode::kPathCountExceedsLimit,
              "path count " + std::to_string(total) + " exceeds limit " +
                  std::to_string(limit)),
        total_(total) {}

  // Saturates at DBL_MAX for astronomically large graphs.
  double total() const noexcept { return total_; }

 private:
  double total_;
};

}  // namespace flash
