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

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "recycle/oracle.hpp"

namespace recycle::oracle {

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30'000};
};

// Exponential backoff without jitter. Successive delays never decrease: a
// server-provided Retry-After hint can raise the delay, and later delays keep
// at least that value.
class Backoff {
 public:
  explicit Backoff(RetryPolicy policy) : policy_(policy) {}

  std::chrono::milliseconds next(
      std::optional<std::chrono::milliseconds> hint = std::nullopt);

 private:
  RetryPolicy policy_;
  int step_ = 0;
  std::chrono::milliseconds previous_{0};
};

// File-per-key response store: `<dir>/<key>.json` holds the canonical request
// and the stored response. Writes are atomic (temp file + rename), so
// concurrent writers of one key converge and readers never see partial files.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir, bool read_only = false);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path entry_path(std::string_view key) const;

  // The stored `response` document, or nullopt when absent or unreadable.
  std::optional<nlohmann::json> load(std::string_view key) const;
  void store(std::string_view key, const nlohmann::ordered_json& request,
             const nlohmann::ordered_json& response) const;

 private:
  std::filesystem::path dir_;
  bool read_only_;
};

enum class BackendMode { kLive, kReplay, kMock };

std::string_view to_string(BackendMode mode) noexcept;

struct GatewayOptions {
  BackendMode mode = BackendMode::kMock;
  // Live/mock: optional on-disk cache. Replay: the fixture directory (required).
  std::optional<std::filesystem::path> cache_dir;
  // Upper bound on in-flight backend calls across all threads.
  int concurrency = 4;
  // Minimum spacing between backend call starts; zero disables.
  std::chrono::milliseconds min_request_interval{0};
  // Model ids that enter scorer/embedder cache keys.
  std::string scorer_model = "scorer";
  std::string embedder_model = "embedder";
  // Scored continuations longer than this many tokens are rejected.
  std::size_t scorer_window = 4096;
  // Injected so tests can observe backoff without waiting.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewayStats {
  std::uint64_t chat_calls = 0;
  std::uint64_t logprob_calls = 0;
  std::uint64_t embedding_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t retries = 0;
};

// Uniform entry point to the oracle, scorer and embedder. Shareable across
// threads.
//
// Every result is looked up by the SHA-256 of its canonical request before
// any backend is touched. In replay mode the backends are never consulted and
// a missing entry is a kReplayMiss error. Without a cache directory an
// in-memory map plays the same role.
class OracleGateway {
 public:
  OracleGateway(GatewayOptions options, std::shared_ptr<ChatBackend> chat,
                std::shared_ptr<LogprobBackend> scorer,
                std::shared_ptr<EmbeddingBackend> embedder);

  static std::shared_ptr<OracleGateway> replay(
      const std::filesystem::path& dir, GatewayOptions options = {});

  // Retries transport failures, 408, 429 and 5xx with exponential backoff up
  // to policy.max_attempts. Throws kRateLimitExhausted (retries spent on
  // 429), kProviderError, kTransportError, kReplayMiss or
  // kBackendUnavailable.
  ChatResponse complete(const ChatRequest& request,
                        const RetryPolicy& policy = {});

  // Throws kPreconditionViolation for an empty continuation,
  // kContinuationTooLong past the scorer window, kBackendUnavailable.
  TokenLogprobs score_logprobs(std::string_view context,
                               std::string_view continuation);

  // Throws kPreconditionViolation for empty text, kBackendUnavailable.
  std::vector<double> embed(std::string_view text);

  bool has_chat() const noexcept;
  bool has_scorer() const noexcept;
  bool has_embedder() const noexcept;

  const GatewayOptions& options() const noexcept { return options_; }
  GatewayStats stats() const noexcept;

 private:
  std::optional<nlohmann::json> lookup(const std::string& key);
  void remember(const std::string& key, const nlohmann::ordered_json& request,
                const nlohmann::ordered_json& response);
  template <typename Call>
  auto with_retries(const RetryPolicy& policy, Call&& call)
      -> std::pair<decltype(call()), int>;
  void pace();
  void sleep_for(std::chrono::milliseconds delay);
  [[noreturn]] void replay_miss(const std::string& key,
                                std::string_view what) const;

  GatewayOptions options_;
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<LogprobBackend> scorer_;
  std::shared_ptr<EmbeddingBackend> embedder_;
  std::optional<ResponseCache> disk_;

  std::mutex memory_mutex_;
  std::unordered_map<std::string, nlohmann::json> memory_;

  std::counting_semaphore<1024> in_flight_;
  std::mutex pace_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};

  std::atomic<std::uint64_t> chat_calls_{0};
  std::atomic<std::uint64_t> logprob_calls_{0};
  std::atomic<std::uint64_t> embedding_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> retries_{0};
};

}  // namespace recycle::oracle
