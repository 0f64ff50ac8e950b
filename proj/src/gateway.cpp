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

#include "recycle/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <thread>

#include "recycle/util.hpp"

namespace recycle::oracle {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

// Releases a counting_semaphore permit on scope exit.
class Permit {
 public:
  explicit Permit(std::counting_semaphore<1024>& sem) : sem_(sem) {
    sem_.acquire();
  }
  ~Permit() { sem_.release(); }
  Permit(const Permit&) = delete;
  Permit& operator=(const Permit&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

}  // namespace

std::chrono::milliseconds Backoff::next(
    std::optional<std::chrono::milliseconds> hint) {
  const double scaled = static_cast<double>(policy_.initial_delay.count()) *
                        std::pow(policy_.multiplier, step_);
  ++step_;
  const double capped =
      std::min(scaled, static_cast<double>(policy_.max_delay.count()));
  auto delay = std::chrono::milliseconds(static_cast<std::int64_t>(capped));
  if (hint) delay = std::max(delay, std::min(*hint, policy_.max_delay));
  delay = std::max(delay, previous_);
  previous_ = delay;
  return delay;
}

ResponseCache::ResponseCache(std::filesystem::path dir, bool read_only)
    : dir_(std::move(dir)), read_only_(read_only) {
  if (read_only_) {
    if (!std::filesystem::is_directory(dir_)) {
      throw Error(ErrorKind::kIoFailure,
                  "cache directory does not exist: " + dir_.string());
    }
    return;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    throw Error(ErrorKind::kIoFailure,
                "cannot create cache directory " + dir_.string() + ": " +
                    ec.message());
  }
}

std::filesystem::path ResponseCache::entry_path(std::string_view key) const {
  return dir_ / (std::string(key) + ".json");
}

std::optional<nlohmann::json> ResponseCache::load(std::string_view key) const {
  const auto path = entry_path(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    auto doc = nlohmann::json::parse(read_file(path));
    if (!doc.is_object() || !doc.contains("response")) return std::nullopt;
    return doc["response"];
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void ResponseCache::store(std::string_view key, const ordered_json& request,
                          const ordered_json& response) const {
  if (read_only_) return;
  ordered_json entry;
  entry["key"] = key;
  entry["created_at"] = utc_timestamp();
  entry["request"] = request;
  entry["response"] = response;
  write_file_atomic(entry_path(key), entry.dump(2) + "\n");
}

std::string_view to_string(BackendMode mode) noexcept {
  switch (mode) {
    case BackendMode::kLive:
      return "live";
    case BackendMode::kReplay:
      return "replay";
    case BackendMode::kMock:
      return "mock";
  }
  return "mock";
}

OracleGateway::OracleGateway(GatewayOptions options,
                             std::shared_ptr<ChatBackend> chat,
                             std::shared_ptr<LogprobBackend> scorer,
                             std::shared_ptr<EmbeddingBackend> embedder)
    : options_(std::move(options)),
      chat_(std::move(chat)),
      scorer_(std::move(scorer)),
      embedder_(std::move(embedder)),
      in_flight_(std::clamp(options_.concurrency, 1, 1024)) {
  if (options_.concurrency < 1) {
    throw Error(ErrorKind::kInvalidConfig, "concurrency must be >= 1");
  }
  if (options_.mode == BackendMode::kReplay) {
    if (!options_.cache_dir) {
      throw Error(ErrorKind::kInvalidConfig,
                  "replay mode needs a fixture directory");
    }
    // Replay never falls through to a backend.
    chat_.reset();
    scorer_.reset();
    embedder_.reset();
    disk_.emplace(*options_.cache_dir, /*read_only=*/true);
  } else if (options_.cache_dir) {
    disk_.emplace(*options_.cache_dir);
  }
}

std::shared_ptr<OracleGateway> OracleGateway::replay(
    const std::filesystem::path& dir, GatewayOptions options) {
  options.mode = BackendMode::kReplay;
  options.cache_dir = dir;
  return std::make_shared<OracleGateway>(std::move(options), nullptr, nullptr,
                                         nullptr);
}

bool OracleGateway::has_chat() const noexcept {
  return options_.mode == BackendMode::kReplay || chat_ != nullptr;
}

bool OracleGateway::has_scorer() const noexcept {
  return options_.mode == BackendMode::kReplay || scorer_ != nullptr;
}

bool OracleGateway::has_embedder() const noexcept {
  return options_.mode == BackendMode::kReplay || embedder_ != nullptr;
}

GatewayStats OracleGateway::stats() const noexcept {
  return {chat_calls_.load(), logprob_calls_.load(), embedding_calls_.load(),
          cache_hits_.load(), retries_.load()};
}

std::optional<nlohmann::json> OracleGateway::lookup(const std::string& key) {
  std::optional<nlohmann::json> found;
  if (disk_) {
    found = disk_->load(key);
  } else {
    std::lock_guard lock(memory_mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) found = it->second;
  }
  if (found) cache_hits_.fetch_add(1);
  return found;
}

void OracleGateway::remember(const std::string& key,
                             const ordered_json& request,
                             const ordered_json& response) {
  if (disk_) {
    disk_->store(key, request, response);
    return;
  }
  std::lock_guard lock(memory_mutex_);
  memory_.insert_or_assign(key, nlohmann::json(response));
}

void OracleGateway::sleep_for(std::chrono::milliseconds delay) {
  if (delay.count() <= 0) return;
  if (options_.sleep) {
    options_.sleep(delay);
  } else {
    std::this_thread::sleep_for(delay);
  }
}

void OracleGateway::pace() {
  if (options_.min_request_interval.count() <= 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(pace_mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + options_.min_request_interval;
  }
  const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(
      slot - std::chrono::steady_clock::now());
  sleep_for(wait);
}

void OracleGateway::replay_miss(const std::string& key,
                                std::string_view what) const {
  throw Error(ErrorKind::kReplayMiss,
              "replay fixture missing for " + std::string(what) + " (key " +
                  key + ") in " + options_.cache_dir->string());
}

template <typename Call>
auto OracleGateway::with_retries(const RetryPolicy& policy, Call&& call)
    -> std::pair<decltype(call()), int> {
  const int max_attempts = std::max(1, policy.max_attempts);
  Backoff backoff(policy);
  int last_status = 0;
  std::string last_message;
  for (int attempt = 1;; ++attempt) {
    std::optional<std::chrono::milliseconds> hint;
    try {
      return {call(), attempt};
    } catch (const ProviderFailure& failure) {
      if (!failure.retryable()) {
        throw Error(ErrorKind::kProviderError,
                    "provider rejected request (HTTP " +
                        std::to_string(failure.status()) +
                        "): " + failure.what());
      }
      last_status = failure.status();
      last_message = failure.what();
      hint = failure.retry_after();
    } catch (const Error& error) {
      if (error.kind() != ErrorKind::kTransportError) throw;
      last_status = 0;
      last_message = error.what();
    }
    if (attempt >= max_attempts) break;
    retries_.fetch_add(1);
    sleep_for(backoff.next(hint));
  }

  const std::string summary = "after " + std::to_string(max_attempts) +
                              " attempts: " + last_message;
  if (last_status == 429) {
    throw Error(ErrorKind::kRateLimitExhausted, "rate limited " + summary);
  }
  if (last_status == 0) {
    throw Error(ErrorKind::kTransportError, "transport failed " + summary);
  }
  throw Error(ErrorKind::kProviderError,
              "provider failed (HTTP " + std::to_string(last_status) + ") " +
                  summary);
}

ChatResponse OracleGateway::complete(const ChatRequest& request,
                                     const RetryPolicy& policy) {
  request.validate();
  const auto canonical = canonical_request(request);
  const auto key = cache_key(canonical);

  if (auto hit = lookup(key)) {
    try {
      auto response = chat_response_from_json(*hit);
      response.from_cache = true;
      response.attempts = 0;
      return response;
    } catch (const nlohmann::json::exception&) {
      // Unusable entry: treat as a miss.
    }
  }
  if (options_.mode == BackendMode::kReplay) replay_miss(key, "chat request");
  if (!chat_) {
    throw Error(ErrorKind::kBackendUnavailable, "no chat backend configured");
  }

  auto response = with_retries(policy, [&] {
    Permit permit(in_flight_);
    pace();
    chat_calls_.fetch_add(1);
    return chat_->complete(request);
  });
  response.first.from_cache = false;
  response.first.attempts = response.second;
  remember(key, canonical, to_json(response.first));
  return response.first;
}

TokenLogprobs OracleGateway::score_logprobs(std::string_view context,
                                            std::string_view continuation) {
  if (continuation.empty()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "cannot score an empty continuation");
  }
  const auto canonical =
      canonical_logprob_request(options_.scorer_model, context, continuation);
  const auto key = cache_key(canonical);

  TokenLogprobs result;
  bool have = false;
  if (auto hit = lookup(key)) {
    try {
      result = token_logprobs_from_json(*hit);
      have = true;
    } catch (const nlohmann::json::exception&) {
    }
  }
  if (!have) {
    if (options_.mode == BackendMode::kReplay) replay_miss(key, "logprobs");
    if (!scorer_) {
      throw Error(ErrorKind::kBackendUnavailable,
                  "no logprob scorer configured");
    }
    result = with_retries(RetryPolicy{}, [&] {
               Permit permit(in_flight_);
               pace();
               logprob_calls_.fetch_add(1);
               return scorer_->score(context, continuation);
             }).first;
    result.validate();
    remember(key, canonical, to_json(result));
  }
  result.validate();
  if (result.continuation().size() > options_.scorer_window) {
    throw Error(ErrorKind::kContinuationTooLong,
                "continuation has " +
                    std::to_string(result.continuation().size()) +
                    " tokens, window is " +
                    std::to_string(options_.scorer_window));
  }
  return result;
}

std::vector<double> OracleGateway::embed(std::string_view text) {
  if (text.empty()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "cannot embed empty text");
  }
  const auto canonical =
      canonical_embedding_request(options_.embedder_model, text);
  const auto key = cache_key(canonical);
  if (auto hit = lookup(key)) {
    try {
      return hit->at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
    }
  }
  if (options_.mode == BackendMode::kReplay) replay_miss(key, "embedding");
  if (!embedder_) {
    throw Error(ErrorKind::kBackendUnavailable, "no embedder configured");
  }
  auto vector = with_retries(RetryPolicy{}, [&] {
                  Permit permit(in_flight_);
                  pace();
                  embedding_calls_.fetch_add(1);
                  return embedder_->embed(text);
                }).first;
  if (vector.empty()) {
    throw Error(ErrorKind::kBackendUnavailable,
                "embedder returned an empty vector");
  }
  ordered_json stored;
  stored["vector"] = vector;
  remember(key, canonical, stored);
  return vector;
}

}  // namespace recycle::oracle
