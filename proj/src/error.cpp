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

#include "flash/error.hpp"

namespace flash {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kPathCountExceedsLimit: return "PathCountExceedsLimit";
    case ErrorCode::kUnknownAlgorithm: return "UnknownAlgorithm";
    case ErrorCode::kEdgeViolation: return "EdgeViolation";
    case ErrorCode::kEmptyPathSet: return "EmptyPathSet";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonSymmetricInput: return "NonSymmetricInput";
    case ErrorCode::kEmptyHistory: return "EmptyHistory";
    case ErrorCode::kStepTimeout: return "StepTimeout";
    case ErrorCode::kExecutorFailure: return "ExecutorFailure";
    case ErrorCode::kHandshakeFailure: return "HandshakeFailure";
    case ErrorCode::kProtocolViolation: return "ProtocolViolation";
    case ErrorCode::kWorkerExited: return "WorkerExited";
    case ErrorCode::kBudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::kConfigParse: return "ConfigParseError";
    case ErrorCode::kTraceParse: return "TraceParseError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kInterrupted: return "Interrupted";
  }
  return "Unknown";
}

}  // namespace flash
