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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace recycle {

// Every failure the library reports is an `Error` carrying one of these
// kinds. Callers branch on `kind()`; the message is for humans.
enum class ErrorKind {
  // dataset_io
  kMalformedFile,
  kSchemaViolation,
  kEmptyDataset,
  kIoFailure,
  // oracle gateway
  kRateLimitExhausted,
  kProviderError,
  kTransportError,
  kReplayMiss,
  kBackendUnavailable,
  kContinuationTooLong,
  // reflection
  kEmptyCriteria,
  kMarkerMissing,
  kEmptySpan,
  // metrics
  kZeroVector,
  kAllRecordsFailed,
  // judge
  kScoreParseError,
  // shared
  kPreconditionViolation,
  kInvalidConfig,
  kInterrupted,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace recycle
