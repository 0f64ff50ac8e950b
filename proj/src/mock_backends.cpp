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

#include "recycle/mock_backends.hpp"

#include <cctype>
#include <cstdint>
#include <unordered_set>

#include "recycle/judge.hpp"
#include "recycle/reflection.hpp"
#include "recycle/util.hpp"

namespace recycle::oracle {
namespace {

std::string_view between(std::string_view text, std::string_view open,
                         std::string_view close) {
  const auto start = text.find(open);
  if (start == std::string_view::npos) return {};
  const auto body = start + open.size();
  const auto end = text.find(close, body);
  if (end == std::string_view::npos) return text.substr(body);
  return text.substr(body, end - body);
}

std::vector<std::string> criteria_lines(std::string_view prompt) {
  std::vector<std::string> lines;
  auto block = between(prompt, std::string(kCriteriaHeading) + "\n",
                       std::string("\n") + std::string(kTaskHeading));
  while (!block.empty()) {
    const auto newline = block.find('\n');
    auto line = trim(block.substr(0, newline));
    if (!line.empty()) {
      // Drop the "N. " enumeration.
      const auto dot = line.find(". ");
      lines.emplace_back(dot == std::string_view::npos ? line
                                                       : line.substr(dot + 2));
    }
    if (newline == std::string_view::npos) break;
    block.remove_prefix(newline + 1);
  }
  return lines;
}

ChatResponse text_response(std::string text) {
  ChatResponse response;
  response.usage.completion_tokens =
      static_cast<std::int64_t>(text.size() / 4 + 1);
  response.text = std::move(text);
  response.finish_reason = FinishReason::kStop;
  return response;
}

const std::string& last_user_message(const ChatRequest& request) {
  return request.messages.back().content;
}

ChatResponse reflect(const ChatRequest& request) {
  const std::string& prompt = last_user_message(request);
  std::string out = "Critique:\n";
  for (const auto& criterion : criteria_lines(prompt)) {
    out += "- " + criterion +
           ": the example leaves room for more depth and precision here.\n";
  }
  out += '\n';
  if (prompt.find(kOriginalInstructionHeading) != std::string::npos) {
    const auto instruction = trim(
        between(prompt, std::string(kOriginalInstructionHeading) + "\n",
                std::string("\n\n") + std::string(kOriginalAnswerHeading)));
    const auto answer =
        trim(between(prompt, std::string(kOriginalAnswerHeading) + "\n",
                     std::string("\n\n") + std::string(kCriteriaHeading)));
    out += "[New Instruction] ";
    out += instruction;
    out += " Explain your reasoning step by step and give one concrete "
           "example. [End]\n";
    out += "[New Answer] ";
    out += answer;
    out += "\n\nStep by step: the answer above follows from the key facts "
           "of the question, and a concrete example makes it easier to "
           "apply. [End]\n";
    return text_response(std::move(out));
  }
  const auto answer =
      trim(between(prompt, std::string(kAnswerHeading) + "\n",
                   std::string("\n\n") + std::string(kCriteriaHeading)));
  out += "[New Answer] ";
  out += answer;
  out += "\n\nIn summary, each part of the instruction has been addressed "
         "with accurate and relevant detail. [End]\n";
  return text_response(std::move(out));
}

ChatResponse judge_by_length(const ChatRequest& request) {
  const std::string& prompt = last_user_message(request);
  const auto first = between(prompt, judge::kFirstAssistantOpen,
                             judge::kFirstAssistantClose);
  const auto second = between(prompt, judge::kSecondAssistantOpen,
                              judge::kSecondAssistantClose);
  int score_first = 7;
  int score_second = 7;
  if (first.size() > second.size()) {
    score_first = 8;
    score_second = 6;
  } else if (first.size() < second.size()) {
    score_first = 6;
    score_second = 8;
  }
  return text_response(std::to_string(score_first) + " " +
                       std::to_string(score_second) +
                       "\nThe more detailed answer is preferred.");
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string lowercase(std::string_view word) {
  std::string out(word);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    const std::size_t start = i;
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

}  // namespace

std::shared_ptr<ChatBackend> make_mock_chat_backend(std::string_view name) {
  if (name == "reflect") {
    return std::make_shared<FunctionChatBackend>(reflect);
  }
  if (name == "garbage") {
    return std::make_shared<FunctionChatBackend>([](const ChatRequest&) {
      return text_response(
          "I am not able to follow the requested format today.");
    });
  }
  if (name == "judge-tie") {
    return std::make_shared<FunctionChatBackend>([](const ChatRequest&) {
      return text_response("7 7\nBoth answers are equally good.");
    });
  }
  if (name == "judge-length") {
    return std::make_shared<FunctionChatBackend>(judge_by_length);
  }
  throw Error(ErrorKind::kInvalidConfig,
              "unknown mock chat backend: " + std::string(name));
}

std::vector<std::string> mock_chat_backend_names() {
  return {"reflect", "garbage", "judge-tie", "judge-length"};
}

double UnigramScorer::word_logprob(std::string_view word) {
  return -(1.0 + static_cast<double>(fnv1a(lowercase(word)) % 40) / 10.0);
}

TokenLogprobs UnigramScorer::score(std::string_view context,
                                   std::string_view continuation) {
  TokenLogprobs out;
  std::unordered_set<std::string> context_words;
  for (auto word : split_words(context)) {
    out.tokens.push_back({std::string(word), word_logprob(word)});
    context_words.insert(lowercase(word));
  }
  out.context_boundary = out.tokens.size();
  for (auto word : split_words(continuation)) {
    double logprob = word_logprob(word);
    if (context_words.count(lowercase(word)) > 0) logprob *= 0.5;
    out.tokens.push_back({std::string(word), logprob});
  }
  return out;
}

std::vector<double> LetterFrequencyEmbedder::embed(std::string_view text) {
  std::vector<double> counts(26, 0.0);
  double letters = 0.0;
  for (unsigned char c : text) {
    const int lower = std::tolower(c);
    if (lower >= 'a' && lower <= 'z') {
      counts[static_cast<std::size_t>(lower - 'a')] += 1.0;
      letters += 1.0;
    }
  }
  if (letters > 0.0) {
    for (double& value : counts) value /= letters;
  }
  return counts;
}

std::shared_ptr<LogprobBackend> make_mock_scorer(std::string_view name) {
  if (name == "unigram") return std::make_shared<UnigramScorer>();
  throw Error(ErrorKind::kInvalidConfig,
              "unknown mock scorer: " + std::string(name));
}

std::shared_ptr<EmbeddingBackend> make_mock_embedder(std::string_view name) {
  if (name == "letters") return std::make_shared<LetterFrequencyEmbedder>();
  throw Error(ErrorKind::kInvalidConfig,
              "unknown mock embedder: " + std::string(name));
}

}  // namespace recycle::oracle
