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

#include "recycle/oracle.hpp"

#include <cmath>

#include "recycle/util.hpp"

namespace recycle::oracle {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::kSystem:
      return "system";
    case Role::kUser:
      return "user";
    case Role::kAssistant:
      return "assistant";
  }
  return "user";
}

std::string_view to_string(FinishReason reason) noexcept {
  switch (reason) {
    case FinishReason::kStop:
      return "stop";
    case FinishReason::kLength:
      return "length";
    case FinishReason::kOther:
      return "other";
  }
  return "other";
}

FinishReason finish_reason_from_string(std::string_view text) noexcept {
  if (text == "stop") return FinishReason::kStop;
  if (text == "length") return FinishReason::kLength;
  return FinishReason::kOther;
}

void ChatRequest::validate() const {
  if (model_id.empty()) {
    throw Error(ErrorKind::kPreconditionViolation, "chat request has no model");
  }
  if (messages.empty()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "chat request has no messages");
  }
  if (messages.back().role != Role::kUser) {
    throw Error(ErrorKind::kPreconditionViolation,
                "last chat message must have role user");
  }
  if (!(temperature >= 0.0)) {
    throw Error(ErrorKind::kPreconditionViolation,
                "temperature must be >= 0");
  }
  if (max_tokens <= 0) {
    throw Error(ErrorKind::kPreconditionViolation,
                "max_tokens must be positive");
  }
}

void TokenLogprobs::validate() const {
  if (context_boundary > tokens.size()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "context boundary beyond token list");
  }
  if (context_boundary == tokens.size()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "scored continuation span is empty");
  }
  for (const auto& token : tokens) {
    if (std::isnan(token.logprob) || token.logprob > 0.0) {
      throw Error(ErrorKind::kPreconditionViolation,
                  "token logprob must be <= 0");
    }
  }
}

ordered_json canonical_request(const ChatRequest& request) {
  ordered_json doc;
  doc["kind"] = "chat";
  doc["model"] = request.model_id;
  ordered_json messages = ordered_json::array();
  for (const auto& message : request.messages) {
    ordered_json m;
    m["role"] = to_string(message.role);
    m["content"] = message.content;
    messages.push_back(std::move(m));
  }
  doc["messages"] = std::move(messages);
  doc["temperature"] = request.temperature;
  doc["max_tokens"] = request.max_tokens;
  doc["seed"] = request.seed ? ordered_json(*request.seed) : ordered_json();
  return doc;
}

ordered_json canonical_logprob_request(std::string_view model,
                                       std::string_view context,
                                       std::string_view continuation) {
  ordered_json doc;
  doc["kind"] = "logprob";
  doc["model"] = model;
  doc["context"] = context;
  doc["continuation"] = continuation;
  return doc;
}

ordered_json canonical_embedding_request(std::string_view model,
                                         std::string_view text) {
  ordered_json doc;
  doc["kind"] = "embedding";
  doc["model"] = model;
  doc["text"] = text;
  return doc;
}

std::string cache_key(const ordered_json& canonical) {
  return sha256_hex(canonical.dump());
}

std::string cache_key(const ChatRequest& request) {
  return cache_key(canonical_request(request));
}

ordered_json to_json(const ChatResponse& response) {
  ordered_json doc;
  doc["text"] = response.text;
  doc["finish_reason"] = to_string(response.finish_reason);
  doc["usage"] = {{"prompt_tokens", response.usage.prompt_tokens},
                  {"completion_tokens", response.usage.completion_tokens}};
  return doc;
}

ChatResponse chat_response_from_json(const nlohmann::json& doc) {
  ChatResponse response;
  response.text = doc.at("text").get<std::string>();
  response.finish_reason =
      finish_reason_from_string(doc.value("finish_reason", "other"));
  if (auto it = doc.find("usage"); it != doc.end() && it->is_object()) {
    response.usage.prompt_tokens = it->value("prompt_tokens", 0);
    response.usage.completion_tokens = it->value("completion_tokens", 0);
  }
  return response;
}

ordered_json to_json(const TokenLogprobs& logprobs) {
  ordered_json tokens = ordered_json::array();
  for (const auto& token : logprobs.tokens) {
    tokens.push_back(ordered_json::array({token.token, token.logprob}));
  }
  ordered_json doc;
  doc["tokens"] = std::move(tokens);
  doc["context_boundary"] = logprobs.context_boundary;
  return doc;
}

TokenLogprobs token_logprobs_from_json(const nlohmann::json& doc) {
  TokenLogprobs logprobs;
  for (const auto& entry : doc.at("tokens")) {
    logprobs.tokens.push_back(
        {entry.at(0).get<std::string>(), entry.at(1).get<double>()});
  }
  logprobs.context_boundary = doc.at("context_boundary").get<std::size_t>();
  return logprobs;
}

}  // namespace recycle::oracle
