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

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "recycle/error.hpp"

namespace recycle::oracle {

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role role) noexcept;

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 2048;
  std::optional<std::int64_t> seed;

  // Throws kPreconditionViolation unless messages is non-empty, ends with a
  // user turn, temperature >= 0 and max_tokens > 0.
  void validate() const;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

enum class FinishReason { kStop, kLength, kOther };

std::string_view to_string(FinishReason reason) noexcept;
FinishReason finish_reason_from_string(std::string_view text) noexcept;

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::kStop;
  Usage usage;
  bool from_cache = false;
  // Backend attempts spent on this call; 0 when served from cache.
  int attempts = 0;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;  // natural log, <= 0
};

// Per-token scores for `context ++ continuation`; tokens before
// context_boundary are conditioning context, the rest is the scored span.
struct TokenLogprobs {
  std::vector<TokenLogprob> tokens;
  std::size_t context_boundary = 0;

  std::span<const TokenLogprob> continuation() const {
    return std::span<const TokenLogprob>(tokens).subspan(
        std::min(context_boundary, tokens.size()));
  }

  // Throws kPreconditionViolation if any logprob is positive or NaN, the
  // boundary is out of range or the scored span is empty.
  void validate() const;
};

// Canonical request document. Injective over (model_id, messages,
// temperature, max_tokens, seed); object keys are emitted in a fixed order.
nlohmann::ordered_json canonical_request(const ChatRequest& request);
nlohmann::ordered_json canonical_logprob_request(std::string_view model,
                                                 std::string_view context,
                                                 std::string_view continuation);
nlohmann::ordered_json canonical_embedding_request(std::string_view model,
                                                   std::string_view text);

// SHA-256 hex of the compact dump of a canonical document.
std::string cache_key(const nlohmann::ordered_json& canonical);
std::string cache_key(const ChatRequest& request);

nlohmann::ordered_json to_json(const ChatResponse& response);
ChatResponse chat_response_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const TokenLogprobs& logprobs);
TokenLogprobs token_logprobs_from_json(const nlohmann::json& doc);

// Raised by backends for a non-success HTTP status. The gateway retries
// 408, 429 and 5xx; everything else is surfaced as kProviderError.
class ProviderFailure : public Error {
 public:
  ProviderFailure(int status, const std::string& message,
                  std::optional<std::chrono::milliseconds> retry_after = {})
      : Error(ErrorKind::kProviderError, message),
        status_(status),
        retry_after_(retry_after) {}

  int status() const noexcept { return status_; }
  std::optional<std::chrono::milliseconds> retry_after() const noexcept {
    return retry_after_;
  }
  bool retryable() const noexcept {
    return status_ == 408 || status_ == 429 || status_ >= 500;
  }

 private:
  int status_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

// The oracle model: one chat completion per call, no retries, no caching.
// Transient network failures are thrown as Error{kTransportError}.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// A causal LM scorer. Returns per-token natural-log probabilities of
// `continuation` placed directly after `context`, under the backend's own
// tokenizer. Empty context means unconditional scoring.
class LogprobBackend {
 public:
  virtual ~LogprobBackend() = default;
  virtual TokenLogprobs score(std::string_view context,
                              std::string_view continuation) = 0;
};

// A sentence embedder with a fixed output dimension.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<double> embed(std::string_view text) = 0;
};

}  // namespace recycle::oracle
