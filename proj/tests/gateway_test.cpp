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

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <thread>

#include "recycle/http_backends.hpp"
#include "test_support.hpp"

namespace recycle::oracle {
namespace {

using namespace std::chrono_literals;
using recycle::testing::FakeTransport;
using recycle::testing::TempDir;

std::string chat_reply(std::string_view text) {
  nlohmann::json doc = {
      {"choices",
       {{{"message", {{"role", "assistant"}, {"content", text}}},
         {"finish_reason", "stop"}}}},
      {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}};
  return doc.dump();
}

ChatRequest sample_request(std::string text = "hello") {
  ChatRequest request;
  request.model_id = "gpt-3.5-turbo";
  request.messages = {{Role::kSystem, "be brief"}, {Role::kUser, std::move(text)}};
  request.seed = 0;
  return request;
}

struct LiveHarness {
  explicit LiveHarness(FakeTransport::Fn fn,
                       std::optional<std::filesystem::path> cache = {}) {
    transport = std::make_shared<FakeTransport>(std::move(fn));
    GatewayOptions options = recycle::testing::quiet_options();
    options.mode = BackendMode::kLive;
    options.cache_dir = std::move(cache);
    options.sleep = [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
    gateway = std::make_unique<OracleGateway>(
        options, std::make_shared<OpenAiChatBackend>(transport, "sk-test"),
        nullptr, nullptr);
  }
  std::shared_ptr<FakeTransport> transport;
  std::vector<std::chrono::milliseconds> sleeps;
  std::unique_ptr<OracleGateway> gateway;
};

TEST(Complete, SecondIdenticalRequestIsServedFromCache) {
  TempDir dir;
  LiveHarness h([](auto, auto, int) { return HttpReply{200, chat_reply("hi"), {}}; },
                dir.path());
  const auto first = h.gateway->complete(sample_request());
  EXPECT_FALSE(first.from_cache);
  EXPECT_EQ(first.attempts, 1);
  EXPECT_EQ(first.text, "hi");
  EXPECT_EQ(first.usage.completion_tokens, 3);
  const auto second = h.gateway->complete(sample_request());
  EXPECT_TRUE(second.from_cache);
  EXPECT_EQ(second.text, "hi");
  EXPECT_EQ(h.transport->posts(), 1);
  EXPECT_EQ(h.gateway->stats().cache_hits, 1u);
  EXPECT_TRUE(std::filesystem::exists(
      dir / (cache_key(sample_request()) + ".json")));
}

TEST(Complete, InMemoryCacheWithoutDirectory) {
  LiveHarness h([](auto, auto, int) { return HttpReply{200, chat_reply("hi"), {}}; });
  h.gateway->complete(sample_request());
  EXPECT_TRUE(h.gateway->complete(sample_request()).from_cache);
  EXPECT_EQ(h.transport->posts(), 1);
}

TEST(Complete, FailTwiceThenSucceed) {
  LiveHarness h([](auto, auto, int call) {
    if (call < 2) return HttpReply{503, "overloaded", {}};
    return HttpReply{200, chat_reply("ok"), {}};
  });
  RetryPolicy policy;
  policy.max_attempts = 3;
  const auto response = h.gateway->complete(sample_request(), policy);
  EXPECT_EQ(response.text, "ok");
  EXPECT_EQ(response.attempts, 3);
  EXPECT_EQ(h.transport->posts(), 3);
  ASSERT_EQ(h.sleeps.size(), 2u);
  EXPECT_EQ(h.sleeps[0], 500ms);
  EXPECT_EQ(h.sleeps[1], 1000ms);
  EXPECT_EQ(h.gateway->stats().retries, 2u);
}

TEST(Complete, PersistentRateLimitExhausts) {
  LiveHarness h([](auto, auto, int) {
    return HttpReply{429, "slow down", {{"retry-after", "2"}}};
  });
  RetryPolicy policy;
  policy.max_attempts = 2;
  EXPECT_ERROR_KIND(h.gateway->complete(sample_request(), policy),
                    ErrorKind::kRateLimitExhausted);
  EXPECT_EQ(h.transport->posts(), 2);
  ASSERT_EQ(h.sleeps.size(), 1u);
  EXPECT_EQ(h.sleeps[0], 2000ms);  // server hint exceeds the base delay
}

TEST(Complete, NonRetryableClientErrorFailsImmediately) {
  LiveHarness h([](auto, auto, int) { return HttpReply{401, "bad key", {}}; });
  EXPECT_ERROR_KIND(h.gateway->complete(sample_request()),
                    ErrorKind::kProviderError);
  EXPECT_EQ(h.transport->posts(), 1);
}

TEST(Complete, PersistentServerErrorIsProviderError) {
  LiveHarness h([](auto, auto, int) { return HttpReply{500, "boom", {}}; });
  RetryPolicy policy;
  policy.max_attempts = 3;
  EXPECT_ERROR_KIND(h.gateway->complete(sample_request(), policy),
                    ErrorKind::kProviderError);
  EXPECT_EQ(h.transport->posts(), 3);
}

TEST(Complete, TransportFailuresAreRetriedThenReported) {
  LiveHarness h([](auto, auto, int) -> HttpReply {
    throw Error(ErrorKind::kTransportError, "connection refused");
  });
  RetryPolicy policy;
  policy.max_attempts = 4;
  EXPECT_ERROR_KIND(h.gateway->complete(sample_request(), policy),
                    ErrorKind::kTransportError);
  EXPECT_EQ(h.transport->posts(), 4);
}

TEST(Complete, InvalidRequestRejectedBeforeAnyCall) {
  LiveHarness h([](auto, auto, int) { return HttpReply{200, chat_reply("x"), {}}; });
  ChatRequest request = sample_request();
  request.messages.clear();
  EXPECT_ERROR_KIND(h.gateway->complete(request),
                    ErrorKind::kPreconditionViolation);
  request = sample_request();
  request.model_id.clear();
  EXPECT_ERROR_KIND(h.gateway->complete(request),
                    ErrorKind::kPreconditionViolation);
  EXPECT_EQ(h.transport->posts(), 0);
}

TEST(Complete, RequestBodyCarriesSeedAndMessages) {
  std::string seen;
  LiveHarness h([&](auto path, auto body, int) {
    EXPECT_EQ(path, "/chat/completions");
    seen = std::string(body);
    return HttpReply{200, chat_reply("x"), {}};
  });
  auto request = sample_request();
  request.seed = 42;
  h.gateway->complete(request);
  const auto doc = nlohmann::json::parse(seen);
  EXPECT_EQ(doc["seed"], 42);
  EXPECT_EQ(doc["messages"][0]["role"], "system");
  EXPECT_EQ(doc["messages"][1]["content"], "hello");
  EXPECT_EQ(doc["temperature"], 0.0);
}

TEST(Replay, MissIsFatalAndNeverReachesABackend) {
  TempDir dir;
  auto gateway = OracleGateway::replay(dir.path());
  EXPECT_ERROR_KIND(gateway->complete(sample_request()), ErrorKind::kReplayMiss);
  EXPECT_ERROR_KIND(gateway->score_logprobs("", "hello"), ErrorKind::kReplayMiss);
  EXPECT_ERROR_KIND(gateway->embed("a"), ErrorKind::kReplayMiss);
}

TEST(Replay, ServesCapturedResponses) {
  TempDir dir;
  {
    LiveHarness h([](auto, auto, int) { return HttpReply{200, chat_reply("cached"), {}}; },
                  dir.path());
    h.gateway->complete(sample_request());
  }
  auto gateway = OracleGateway::replay(dir.path());
  const auto response = gateway->complete(sample_request());
  EXPECT_EQ(response.text, "cached");
  EXPECT_TRUE(response.from_cache);
  EXPECT_EQ(gateway->stats().chat_calls, 0u);
  EXPECT_ERROR_KIND(gateway->complete(sample_request("other")),
                    ErrorKind::kReplayMiss);
}

TEST(Replay, MissingDirectoryIsIoFailure) {
  TempDir dir;
  EXPECT_ERROR_KIND(OracleGateway::replay(dir / "nope"), ErrorKind::kIoFailure);
}

TEST(Backoff, DelaysAreNonDecreasingAndCapped) {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 200; ++round) {
    RetryPolicy policy;
    policy.initial_delay = std::chrono::milliseconds(1 + rng() % 1000);
    policy.multiplier = 1.0 + static_cast<double>(rng() % 300) / 100.0;
    policy.max_delay = std::chrono::milliseconds(1000 + rng() % 60000);
    Backoff backoff(policy);
    std::chrono::milliseconds previous{0};
    for (int step = 0; step < 20; ++step) {
      std::optional<std::chrono::milliseconds> hint;
      if (rng() % 3 == 0) hint = std::chrono::milliseconds(rng() % 120000);
      const auto delay = backoff.next(hint);
      EXPECT_GE(delay, previous);
      EXPECT_LE(delay, std::max(policy.max_delay, policy.initial_delay));
      if (hint) EXPECT_GE(delay, std::min(*hint, policy.max_delay));
      previous = delay;
    }
  }
}

TEST(CacheKey, DistinctRequestsGetDistinctKeys) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> alphabet = {"a", "b", " ", "\n", "\"", ":",
                                             "{", "0"};
  std::map<std::string, nlohmann::ordered_json> seen;
  for (int i = 0; i < 2000; ++i) {
    ChatRequest request;
    request.model_id = "m" + recycle::testing::random_text(rng, alphabet, 2);
    const int messages = 1 + static_cast<int>(rng() % 3);
    for (int m = 0; m < messages; ++m) {
      request.messages.push_back(
          {static_cast<Role>(rng() % 3),
           recycle::testing::random_text(rng, alphabet, 4)});
    }
    request.temperature = static_cast<double>(rng() % 3) / 2.0;
    request.max_tokens = 1 + static_cast<int>(rng() % 3);
    if (rng() % 2) request.seed = static_cast<std::int64_t>(rng() % 3);
    const auto canonical = canonical_request(request);
    const auto key = cache_key(canonical);
    EXPECT_EQ(key, cache_key(request));
    auto [it, inserted] = seen.emplace(key, canonical);
    if (!inserted) EXPECT_EQ(it->second, canonical) << "key collision";
  }
}

TEST(CacheKey, ContentSeparationMatters) {
  ChatRequest a = sample_request();
  a.messages = {{Role::kUser, "ab"}, {Role::kUser, "c"}};
  ChatRequest b = sample_request();
  b.messages = {{Role::kUser, "a"}, {Role::kUser, "bc"}};
  EXPECT_NE(cache_key(a), cache_key(b));
  ChatRequest c = sample_request();
  c.seed.reset();
  EXPECT_NE(cache_key(sample_request()), cache_key(c));
}

class HalfLogprob final : public LogprobBackend {
 public:
  TokenLogprobs score(std::string_view context,
                      std::string_view continuation) override {
    ++calls;
    TokenLogprobs out;
    for (std::string_view text : {context, continuation}) {
      std::size_t start = 0;
      while (start < text.size()) {
        auto end = text.find(' ', start);
        if (end == std::string_view::npos) end = text.size();
        if (end > start) {
          out.tokens.push_back(
              {std::string(text.substr(start, end - start)), -std::numbers::ln2});
        }
        start = end + 1;
      }
      if (text.data() == context.data()) out.context_boundary = out.tokens.size();
    }
    return out;
  }
  int calls = 0;
};

GatewayOptions scorer_options() {
  auto options = recycle::testing::quiet_options();
  options.scorer_window = 8;
  return options;
}

TEST(ScoreLogprobs, UnconditionalHasZeroBoundary) {
  auto scorer = std::make_shared<HalfLogprob>();
  OracleGateway gateway(scorer_options(), nullptr, scorer, nullptr);
  const auto result = gateway.score_logprobs("", "hello world");
  EXPECT_EQ(result.context_boundary, 0u);
  EXPECT_EQ(result.continuation().size(), 2u);
}

TEST(ScoreLogprobs, HalfProbabilityFixture) {
  auto scorer = std::make_shared<HalfLogprob>();
  OracleGateway gateway(scorer_options(), nullptr, scorer, nullptr);
  const auto result = gateway.score_logprobs("some context", "a b c");
  EXPECT_EQ(result.context_boundary, 2u);
  ASSERT_EQ(result.continuation().size(), 3u);
  for (const auto& token : result.tokens) {
    EXPECT_NEAR(token.logprob, -0.69314718055994530942, 1e-12);
  }
  gateway.score_logprobs("some context", "a b c");
  EXPECT_EQ(scorer->calls, 1);
}

TEST(ScoreLogprobs, WindowAndPreconditions) {
  auto scorer = std::make_shared<HalfLogprob>();
  OracleGateway gateway(scorer_options(), nullptr, scorer, nullptr);
  EXPECT_ERROR_KIND(gateway.score_logprobs("", "1 2 3 4 5 6 7 8 9"),
                    ErrorKind::kContinuationTooLong);
  EXPECT_ERROR_KIND(gateway.score_logprobs("ctx", ""),
                    ErrorKind::kPreconditionViolation);
  OracleGateway no_scorer(scorer_options(), nullptr, nullptr, nullptr);
  EXPECT_ERROR_KIND(no_scorer.score_logprobs("", "x"),
                    ErrorKind::kBackendUnavailable);
}

TEST(ScoreLogprobs, PositiveLogprobRejected) {
  class Broken final : public LogprobBackend {
   public:
    TokenLogprobs score(std::string_view, std::string_view) override {
      return TokenLogprobs{{{"x", 0.5}}, 0};
    }
  };
  OracleGateway gateway(scorer_options(), nullptr, std::make_shared<Broken>(),
                        nullptr);
  EXPECT_ANY_THROW(gateway.score_logprobs("", "x"));
}

TEST(Embed, LetterFrequencyOfAb) {
  OracleGateway gateway(recycle::testing::quiet_options(), nullptr, nullptr,
                        make_mock_embedder("letters"));
  const auto vector = gateway.embed("ab");
  ASSERT_EQ(vector.size(), 26u);
  std::vector<double> expected(26, 0.0);
  expected[0] = 0.5;
  expected[1] = 0.5;
  EXPECT_EQ(vector, expected);
  EXPECT_EQ(gateway.embed("a"), gateway.embed("a"));
  EXPECT_EQ(gateway.stats().embedding_calls, 2u);
  EXPECT_ERROR_KIND(gateway.embed(""), ErrorKind::kPreconditionViolation);
}

TEST(Concurrency, InFlightCallsNeverExceedLimit) {
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  auto chat = std::make_shared<recycle::testing::ScriptedChat>(
      [&](const ChatRequest&, int) {
        const int now = ++active;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(2ms);
        --active;
        return std::string("ok");
      });
  auto options = recycle::testing::quiet_options();
  options.concurrency = 2;
  OracleGateway gateway(options, chat, nullptr, nullptr);
  std::vector<std::jthread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) {
        gateway.complete(sample_request(std::to_string(t * 100 + i)));
      }
    });
  }
  threads.clear();
  EXPECT_EQ(chat->calls(), 40);
  EXPECT_LE(peak.load(), 2);
}

TEST(HttpParsing, ChatReply) {
  const auto response = OpenAiChatBackend::parse_reply(chat_reply("text"));
  EXPECT_EQ(response.text, "text");
  EXPECT_EQ(response.finish_reason, FinishReason::kStop);
  EXPECT_EQ(response.usage.prompt_tokens, 11);
  EXPECT_EQ(OpenAiChatBackend::parse_reply(chat_reply("")).finish_reason,
            FinishReason::kOther);
  EXPECT_ERROR_KIND(OpenAiChatBackend::parse_reply("{\"choices\":[]}"),
                    ErrorKind::kBackendUnavailable);
}

TEST(HttpParsing, EchoedLogprobsSplitAtContextBoundary) {
  // Prompt "Q: hi" + " there"; the first token has no logprob and the final
  // token (offset 11) is generated.
  const std::string body = R"({"choices":[{"logprobs":{
    "tokens":["Q",":"," hi"," there","!"],
    "token_logprobs":[null,-0.5,-1.5,-2.0,-0.1],
    "text_offset":[0,1,2,5,11]}}]})";
  const auto result = OpenAiLogprobBackend::parse_reply(body, 5, 11);
  ASSERT_EQ(result.tokens.size(), 3u);
  EXPECT_EQ(result.context_boundary, 2u);
  ASSERT_EQ(result.continuation().size(), 1u);
  EXPECT_EQ(result.continuation()[0].token, " there");
  EXPECT_DOUBLE_EQ(result.continuation()[0].logprob, -2.0);
}

TEST(HttpParsing, RetryAfterHeaders) {
  EXPECT_EQ(parse_retry_after({{"retry-after-ms", "250"}}), 250ms);
  EXPECT_EQ(parse_retry_after({{"retry-after", "1.5"}}), 1500ms);
  EXPECT_EQ(parse_retry_after({{"retry-after", "soon"}}), std::nullopt);
  EXPECT_EQ(parse_retry_after({}), std::nullopt);
}

TEST(HttpParsing, ContextLengthErrorMapsToContinuationTooLong) {
  auto transport = std::make_shared<FakeTransport>([](auto, auto, int) {
    return HttpReply{400,
                     R"({"error":{"message":"This model's maximum context length is 4097 tokens"}})",
                     {}};
  });
  OpenAiLogprobBackend backend(transport, "k", "davinci-002");
  EXPECT_ERROR_KIND(backend.score("", "x"), ErrorKind::kContinuationTooLong);
}

TEST(HttpParsing, Utf8Length) {
  EXPECT_EQ(utf8_length("abc"), 3u);
  EXPECT_EQ(utf8_length("\xC3\xA9\xE2\x82\xAC"), 2u);
}

}  // namespace
}  // namespace recycle::oracle
