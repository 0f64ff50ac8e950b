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

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "recycle/oracle.hpp"

namespace recycle::oracle {

// Adapts a callable into a ChatBackend.
class FunctionChatBackend final : public ChatBackend {
 public:
  using Fn = std::function<ChatResponse(const ChatRequest&)>;
  explicit FunctionChatBackend(Fn fn) : fn_(std::move(fn)) {}
  ChatResponse complete(const ChatRequest& request) override {
    return fn_(request);
  }

 private:
  Fn fn_;
};

// Offline chat backends selectable by name:
//   reflect       well-formed reflection output derived from the prompt
//   garbage       never emits markers or scores
//   judge-tie     always "7 7"
//   judge-length  scores the longer answer 8, the shorter 6, equal 7
// Throws kInvalidConfig for an unknown name.
std::shared_ptr<ChatBackend> make_mock_chat_backend(std::string_view name);
std::vector<std::string> mock_chat_backend_names();

// Whitespace tokenizer with a fixed per-word unigram logprob in
// [-4.9, -1.0] derived from an FNV-1a hash of the lowercased word. A
// continuation word that also occurs in the context gets half the negative
// log-likelihood, so instructions that share vocabulary with their response
// lower its conditional perplexity.
class UnigramScorer final : public LogprobBackend {
 public:
  TokenLogprobs score(std::string_view context,
                      std::string_view continuation) override;

  static double word_logprob(std::string_view word);
};

// 26-dimensional relative letter frequency (case-insensitive a-z; other
// characters ignored). Text without letters maps to the zero vector.
class LetterFrequencyEmbedder final : public EmbeddingBackend {
 public:
  std::vector<double> embed(std::string_view text) override;
};

// "unigram" and "letters" respectively; throws kInvalidConfig otherwise.
std::shared_ptr<LogprobBackend> make_mock_scorer(std::string_view name);
std::shared_ptr<EmbeddingBackend> make_mock_embedder(std::string_view name);

}  // namespace recycle::oracle
