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

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "recycle/oracle.hpp"

namespace recycle::oracle {

struct HttpReply {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;  // lowercase names
};

// Minimal POST-only HTTP seam. Implementations throw Error{kTransportError}
// when no reply was received (connect failure, timeout).
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpReply post(std::string_view path, std::string_view json_body,
                         const std::map<std::string, std::string>& headers) = 0;
};

// cpp-httplib client bound to a base URL such as
// "https://api.openai.com/v1"; the URL path becomes a prefix for every POST.
std::unique_ptr<HttpTransport> make_http_transport(
    const std::string& base_url,
    std::chrono::seconds timeout = std::chrono::seconds(120));

// Parses a Retry-After / retry-after-ms header value.
std::optional<std::chrono::milliseconds> parse_retry_after(
    const std::map<std::string, std::string>& headers);

// OpenAI-compatible `POST /chat/completions`.
class OpenAiChatBackend final : public ChatBackend {
 public:
  OpenAiChatBackend(std::shared_ptr<HttpTransport> transport,
                    std::string api_key);
  ChatResponse complete(const ChatRequest& request) override;

  static nlohmann::ordered_json request_body(const ChatRequest& request);
  static ChatResponse parse_reply(std::string_view body);

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string api_key_;
};

// Scores through an OpenAI-compatible `POST /completions` with
// `echo: true, logprobs: 1` (vLLM, llama.cpp server and similar). The prompt
// is context + continuation; `text_offset` locates the boundary.
class OpenAiLogprobBackend final : public LogprobBackend {
 public:
  OpenAiLogprobBackend(std::shared_ptr<HttpTransport> transport,
                       std::string api_key, std::string model);
  TokenLogprobs score(std::string_view context,
                      std::string_view continuation) override;

  // Exposed for tests. `context_chars` and `total_chars` are code-point
  // counts, matching server-side text offsets.
  static TokenLogprobs parse_reply(std::string_view body,
                                   std::size_t context_chars,
                                   std::size_t total_chars);

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string api_key_;
  std::string model_;
};

// OpenAI-compatible `POST /embeddings`.
class OpenAiEmbeddingBackend final : public EmbeddingBackend {
 public:
  OpenAiEmbeddingBackend(std::shared_ptr<HttpTransport> transport,
                         std::string api_key, std::string model);
  std::vector<double> embed(std::string_view text) override;

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string api_key_;
  std::string model_;
};

// Number of UTF-8 code points in `text`.
std::size_t utf8_length(std::string_view text) noexcept;

}  // namespace recycle::oracle
