// Copyright 2026 The Recycle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "recycle/error.hpp"

namespace recycle {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kMalformedFile:
      return "MalformedFile";
    case ErrorKind::kSchemaViolation:
      return "SchemaViolation";
    case ErrorKind::kEmptyDataset:
      return "EmptyDataset";
    case ErrorKind::kIoFailure:
      return "IoFailure";
    case ErrorKind::kRateLimitExhausted:
      return "RateLimitExhausted";
    case ErrorKind::kProviderError:
      return "ProviderError";
    case ErrorKind::kTransportError:
      return "TransportError";
    case ErrorKind::kReplayMiss:
      return "ReplayMiss";
    case ErrorKind::kBackendUnavailable:
      return "BackendUnavailable";
    case ErrorKind::kContinuationTooLong:
      return "ContinuationTooLong";
    case ErrorKind::kEmptyCriteria:
      return "EmptyCriteria";
    case ErrorKind::kMarkerMissing:
      return "MarkerMissing";
    case ErrorKind::kEmptySpan:
      return "EmptySpan";
    case ErrorKind::kZeroVector:
      return "ZeroVector";
    case ErrorKind::kAllRecordsFailed:
      return "AllRecordsFailed";
    case ErrorKind::kScoreParseError:
      return "ScoreParseError";
    case ErrorKind::kPreconditionViolation:
      return "PreconditionViolation";
    case ErrorKind::kInvalidConfig:
      return "InvalidConfig";
    case ErrorKind::kInterrupted:
      return "Interrupted";
  }
  return "Unknown";
}

}  // namespace recycle
