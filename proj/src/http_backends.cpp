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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "recycle/http_backends.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

namespace recycle::oracle {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string excerpt(std::string_view body) {
  constexpr std::size_t kMax = 300;
  if (body.size() <= kMax) return std::string(body);
  return std::string(body.substr(0, kMax)) + "...";
}

class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, std::chrono::seconds timeout) {
    // Split "scheme://host[:port]/prefix".
    const auto scheme_end = base_url.find("://");
    const auto host_start =
        scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = base_url.find('/', host_start);
    const std::string origin = base_url.substr(0, path_start);
    if (path_start != std::string::npos) {
      prefix_ = base_url.substr(path_start);
      while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
    client_ = std::make_unique<httplib::Client>(origin);
    if (!client_->is_valid()) {
      throw Error(ErrorKind::kInvalidConfig, "invalid base URL: " + base_url);
    }
    client_->set_connection_timeout(std::chrono::seconds(30));
    client_->set_read_timeout(timeout);
    client_->set_write_timeout(timeout);
  }

  HttpReply post(std::string_view path, std::string_view json_body,
                 const std::map<std::string, std::string>& headers) override {
    httplib::Headers request_headers;
    for (const auto& [name, value] : headers) {
      request_headers.emplace(name, value);
    }
    auto result =
        client_->Post(prefix_ + std::string(path), request_headers,
                      std::string(json_body), "application/json");
    if (!result) {
      throw Error(ErrorKind::kTransportError,
                  "HTTP request to " + prefix_ + std::string(path) +
                      " failed: " + httplib::to_string(result.error()));
    }
    HttpReply reply;
    reply.status = result->status;
    reply.body = result->body;
    for (const auto& [name, value] : result->headers) {
      reply.headers.emplace(lowercase(name), value);
    }
    return reply;
  }

 private:
  std::unique_ptr<httplib::Client> client_;
  std::string prefix_;
};

std::map<std::string, std::string> auth_headers(const std::string& api_key) {
  std::map<std::string, std::string> headers;
  if (!api_key.empty()) headers["Authorization"] = "Bearer " + api_key;
  return headers;
}

// Posts and converts non-2xx statuses into ProviderFailure.
json post_json(HttpTransport& transport, std::string_view path,
               const ordered_json& body, const std::string& api_key) {
  const auto reply = transport.post(path, body.dump(), auth_headers(api_key));
  if (reply.status < 200 || reply.status >= 300) {
    throw ProviderFailure(reply.status,
                          "HTTP " + std::to_string(reply.status) + " from " +
                              std::string(path) + ": " + excerpt(reply.body),
                          parse_retry_after(reply.headers));
  }
  try {
    return json::parse(reply.body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kBackendUnavailable,
                "unparseable reply from " + std::string(path) + ": " +
                    e.what());
  }
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(base_url, timeout);
}

std::optional<std::chrono::milliseconds> parse_retry_after(
    const std::map<std::string, std::string>& headers) {
  auto parse_number = [](const std::string& text) -> std::optional<double> {
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || !(value >= 0.0)) return std::nullopt;
    return value;
  };
  if (auto it = headers.find("retry-after-ms"); it != headers.end()) {
    if (auto ms = parse_number(it->second)) {
      return std::chrono::milliseconds(static_cast<std::int64_t>(*ms));
    }
  }
  if (auto it = headers.find("retry-after"); it != headers.end()) {
    if (auto seconds = parse_number(it->second)) {
      return std::chrono::milliseconds(
          static_cast<std::int64_t>(*seconds * 1000.0));
    }
  }
  return std::nullopt;
}

std::size_t utf8_length(std::string_view text) noexcept {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
      }));
}

OpenAiChatBackend::OpenAiChatBackend(std::shared_ptr<HttpTransport> transport,
                                     std::string api_key)
    : transport_(std::move(transport)), api_key_(std::move(api_key)) {}

ordered_json OpenAiChatBackend::request_body(const ChatRequest& request) {
  ordered_json body;
  body["model"] = request.model_id;
  ordered_json messages = ordered_json::array();
  for (const auto& message : request.messages) {
    messages.push_back(
        {{"role", to_string(message.role)}, {"content", message.content}});
  }
  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

ChatResponse OpenAiChatBackend::parse_reply(std::string_view body) {
  try {
    const auto doc = json::parse(body);
    const auto& choice = doc.at("choices").at(0);
    ChatResponse response;
    const auto& content = choice.at("message").at("content");
    response.text = content.is_string() ? content.get<std::string>() : "";
    response.finish_reason = finish_reason_from_string(
        choice.value("finish_reason", std::string("other")));
    if (auto it = doc.find("usage"); it != doc.end() && it->is_object()) {
      response.usage.prompt_tokens = it->value("prompt_tokens", 0);
      response.usage.completion_tokens = it->value("completion_tokens", 0);
    }
    if (response.finish_reason == FinishReason::kStop &&
        response.text.empty()) {
      response.finish_reason = FinishReason::kOther;
    }
    return response;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kBackendUnavailable,
                std::string("malformed chat completion reply: ") + e.what());
  }
}

ChatResponse OpenAiChatBackend::complete(const ChatRequest& request) {
  const auto body = request_body(request);
  const auto reply =
      transport_->post("/chat/completions", body.dump(), auth_headers(api_key_));
  if (reply.status < 200 || reply.status >= 300) {
    throw ProviderFailure(reply.status,
                          "HTTP " + std::to_string(reply.status) +
                              " from /chat/completions: " + excerpt(reply.body),
                          parse_retry_after(reply.headers));
  }
  return parse_reply(reply.body);
}

OpenAiLogprobBackend::OpenAiLogprobBackend(
    std::shared_ptr<HttpTransport> transport, std::string api_key,
    std::string model)
    : transport_(std::move(transport)),
      api_key_(std::move(api_key)),
      model_(std::move(model)) {}

TokenLogprobs OpenAiLogprobBackend::parse_reply(std::string_view body,
                                                std::size_t context_chars,
                                                std::size_t total_chars) {
  try {
    const auto doc = json::parse(body);
    const auto& logprobs = doc.at("choices").at(0).at("logprobs");
    const auto& tokens = logprobs.at("tokens");
    const auto& values = logprobs.at("token_logprobs");
    const auto& offsets = logprobs.at("text_offset");
    TokenLogprobs out;
    bool boundary_set = false;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto offset = offsets.at(i).get<std::size_t>();
      if (offset >= total_chars) break;  // generated, not part of the prompt
      if (!boundary_set && offset >= context_chars) {
        out.context_boundary = out.tokens.size();
        boundary_set = true;
      }
      // The first prompt token has no conditional probability.
      if (values.at(i).is_null()) continue;
      out.tokens.push_back({tokens.at(i).get<std::string>(),
                            std::min(0.0, values.at(i).get<double>())});
    }
    if (!boundary_set) out.context_boundary = out.tokens.size();
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kBackendUnavailable,
                std::string("malformed completions logprob reply: ") +
                    e.what());
  }
}

TokenLogprobs OpenAiLogprobBackend::score(std::string_view context,
                                          std::string_view continuation) {
  const std::string prompt = std::string(context) + std::string(continuation);
  ordered_json body;
  body["model"] = model_;
  body["prompt"] = prompt;
  body["max_tokens"] = 1;
  body["temperature"] = 0;
  body["logprobs"] = 1;
  body["echo"] = true;
  try {
    const auto doc = post_json(*transport_, "/completions", body, api_key_);
    return parse_reply(doc.dump(), utf8_length(context), utf8_length(prompt));
  } catch (const ProviderFailure& failure) {
    const std::string message = lowercase(failure.what());
    if (failure.status() == 400 &&
        (message.find("context length") != std::string::npos ||
         message.find("too long") != std::string::npos)) {
      throw Error(ErrorKind::kContinuationTooLong, failure.what());
    }
    throw;
  }
}

OpenAiEmbeddingBackend::OpenAiEmbeddingBackend(
    std::shared_ptr<HttpTransport> transport, std::string api_key,
    std::string model)
    : transport_(std::move(transport)),
      api_key_(std::move(api_key)),
      model_(std::move(model)) {}

std::vector<double> OpenAiEmbeddingBackend::embed(std::string_view text) {
  ordered_json body;
  body["model"] = model_;
  body["input"] = text;
  const auto doc = post_json(*transport_, "/embeddings", body, api_key_);
  try {
    return doc.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kBackendUnavailable,
                std::string("malformed embeddings reply: ") + e.what());
  }
}

}  // namespace recycle::oracle
