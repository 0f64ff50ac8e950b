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

#include "recycle/judge.hpp"

#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "recycle/error.hpp"
#include "recycle/parallel.hpp"
#include "recycle/util.hpp"

namespace recycle::judge {
namespace {

using ordered_json = nlohmann::ordered_json;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view first_nonempty_line(std::string_view text) {
  while (!text.empty()) {
    const auto newline = text.find('\n');
    const auto line = text.substr(0, newline);
    if (!trim(line).empty()) return line;
    if (newline == std::string_view::npos) break;
    text.remove_prefix(newline + 1);
  }
  return {};
}

std::string format_score(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%g", value);
  return buffer;
}

// One dual-order pass with parse retries; nullopt when never parseable.
std::optional<ScorePair> judge_pass(oracle::OracleGateway& gateway,
                                    const JudgeConfig& config,
                                    std::string_view instruction,
                                    std::string_view a, std::string_view b,
                                    Order order, std::string& error) {
  const bool ab = order == Order::kAB;
  const std::string prompt =
      build_judge_prompt(instruction, ab ? a : b, ab ? b : a);
  const int samples = 1 + std::max(0, config.parse_retries);
  for (int attempt = 0; attempt < samples; ++attempt) {
    oracle::ChatRequest request;
    request.model_id = config.judge_model;
    request.messages = {{oracle::Role::kSystem, std::string(kJudgeSystemPrompt)},
                        {oracle::Role::kUser, prompt}};
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    request.seed = config.seed + attempt;
    const auto response = gateway.complete(request, config.retry);
    try {
      const auto [first, second] = parse_scores(response.text);
      ScorePair pass;
      pass.order = order;
      pass.score_a = ab ? first : second;
      pass.score_b = ab ? second : first;
      pass.raw_judgment = response.text;
      return pass;
    } catch (const Error& e) {
      error = std::string(to_string(order)) + " pass: " + e.what();
    }
  }
  return std::nullopt;
}

}  // namespace

const std::string_view kJudgeSystemPrompt =
    "You are a helpful and precise assistant for checking the quality of "
    "answers.";

std::string_view to_string(Order order) noexcept {
  return order == Order::kAB ? "ab" : "ba";
}

std::string_view to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::kWin:
      return "win";
    case Verdict::kTie:
      return "tie";
    case Verdict::kLose:
      return "lose";
  }
  return "tie";
}

std::string build_judge_prompt(std::string_view instruction,
                               std::string_view first,
                               std::string_view second) {
  if (instruction.empty() || first.empty() || second.empty()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "judge prompt needs a non-empty instruction and two responses");
  }
  std::string prompt;
  prompt += kQuestionHeading;
  prompt += '\n';
  prompt += instruction;
  prompt += "\n\n";
  prompt += kFirstAssistantOpen;
  prompt += '\n';
  prompt += first;
  prompt += '\n';
  prompt += kFirstAssistantClose;
  prompt += "\n\n";
  prompt += kSecondAssistantOpen;
  prompt += '\n';
  prompt += second;
  prompt += '\n';
  prompt += kSecondAssistantClose;
  prompt += "\n\n";
  prompt +=
      "[System]\n"
      "Please rate the helpfulness, relevance, accuracy and level of detail "
      "of the two answers to the question above. Give each assistant an "
      "overall score on a scale of 1 to 10, where a higher score means better "
      "overall performance.\n"
      "On the first line, output exactly two numbers separated by a space: "
      "the score for Assistant 1 followed by the score for Assistant 2. From "
      "the second line on, explain your evaluation. Do not let the order in "
      "which the answers were presented or their length affect your "
      "judgment.\n";
  return prompt;
}

std::pair<double, double> parse_scores(std::string_view raw_judgment) {
  const auto line = first_nonempty_line(raw_judgment);
  double values[2] = {0.0, 0.0};
  int found = 0;
  std::size_t i = 0;
  while (i < line.size() && found < 2) {
    const bool starts_number =
        is_digit(line[i]) ||
        (line[i] == '.' && i + 1 < line.size() && is_digit(line[i + 1]));
    if (!starts_number) {
      ++i;
      continue;
    }
    const std::size_t begin = (i > 0 && line[i - 1] == '-') ? i - 1 : i;
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(line.data() + begin, line.data() + line.size(), value,
                        std::chars_format::fixed);
    if (ec != std::errc() || !std::isfinite(value)) {
      throw Error(ErrorKind::kScoreParseError,
                  "unreadable score in judgment line");
    }
    values[found++] = value;
    i = static_cast<std::size_t>(ptr - line.data());
  }
  if (found < 2) {
    throw Error(ErrorKind::kScoreParseError,
                "expected two scores on the first line of the judgment");
  }
  for (double value : values) {
    if (value < kMinScore || value > kMaxScore) {
      throw Error(ErrorKind::kScoreParseError,
                  "score " + format_score(value) + " outside [1, 10]");
    }
  }
  return {values[0], values[1]};
}

Outcome pass_outcome(const ScorePair& pass) noexcept {
  if (pass.score_a > pass.score_b) return Outcome::kWin;
  if (pass.score_a < pass.score_b) return Outcome::kLoss;
  return Outcome::kTie;
}

Verdict adjudicate(const ScorePair& first, const ScorePair& second) {
  if (first.order == second.order) {
    throw Error(ErrorKind::kPreconditionViolation,
                "adjudication needs one pass in each presentation order");
  }
  auto points = [](Outcome outcome) {
    return outcome == Outcome::kWin ? 1 : outcome == Outcome::kLoss ? -1 : 0;
  };
  const int total = points(pass_outcome(first)) + points(pass_outcome(second));
  if (total > 0) return Verdict::kWin;
  if (total < 0) return Verdict::kLose;
  return Verdict::kTie;
}

ComparisonTally tally(std::vector<ItemResult> items) {
  ComparisonTally out;
  for (const auto& item : items) {
    if (!item.comparison) {
      ++out.unscored;
      continue;
    }
    switch (item.comparison->verdict) {
      case Verdict::kWin:
        ++out.wins;
        break;
      case Verdict::kTie:
        ++out.ties;
        break;
      case Verdict::kLose:
        ++out.loses;
        break;
    }
  }
  out.items = std::move(items);
  return out;
}

ComparisonTally run_comparison(oracle::OracleGateway& gateway,
                               const std::vector<std::string>& instructions,
                               const std::vector<std::string>& outputs_a,
                               const std::vector<std::string>& outputs_b,
                               const JudgeConfig& config,
                               const std::atomic<bool>* stop) {
  if (instructions.size() != outputs_a.size() ||
      instructions.size() != outputs_b.size()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "test set and response lists are not aligned: " +
                    std::to_string(instructions.size()) + " / " +
                    std::to_string(outputs_a.size()) + " / " +
                    std::to_string(outputs_b.size()));
  }
  const std::size_t n = instructions.size();
  std::vector<ItemResult> items(n);
  const bool finished = parallel_for(
      n, config.concurrency,
      [&](std::size_t i) {
        ItemResult& item = items[i];
        item.index = i;
        const auto& instruction = instructions[i];
        const auto& a = outputs_a[i];
        const auto& b = outputs_b[i];
        if (instruction.empty() || a.empty() || b.empty()) {
          item.error = "empty instruction or response";
          return;
        }
        auto ab = judge_pass(gateway, config, instruction, a, b, Order::kAB,
                             item.error);
        if (!ab) return;
        auto ba = judge_pass(gateway, config, instruction, a, b, Order::kBA,
                             item.error);
        if (!ba) return;
        ScoredComparison comparison;
        comparison.instruction = instruction;
        comparison.response_a = a;
        comparison.response_b = b;
        comparison.verdict = adjudicate(*ab, *ba);
        comparison.pass_ab = std::move(*ab);
        comparison.pass_ba = std::move(*ba);
        item.comparison = std::move(comparison);
        item.error.clear();
      },
      stop);
  if (!finished) {
    throw Error(ErrorKind::kInterrupted, "judging stopped before completion");
  }
  return tally(std::move(items));
}

ordered_json to_json(const ComparisonTally& result) {
  ordered_json doc;
  doc["wins"] = result.wins;
  doc["ties"] = result.ties;
  doc["loses"] = result.loses;
  doc["unscored"] = result.unscored;
  ordered_json items = ordered_json::array();
  for (const auto& item : result.items) {
    ordered_json entry;
    entry["index"] = item.index;
    if (item.comparison) {
      const auto& c = *item.comparison;
      entry["scores"] = {
          {"ab", {{"a", c.pass_ab.score_a}, {"b", c.pass_ab.score_b}}},
          {"ba", {{"a", c.pass_ba.score_a}, {"b", c.pass_ba.score_b}}}};
      entry["verdict"] = to_string(c.verdict);
    } else {
      entry["scores"] = nullptr;
      entry["verdict"] = "unscored";
      entry["error"] = item.error;
    }
    items.push_back(std::move(entry));
  }
  doc["items"] = std::move(items);
  return doc;
}

std::string summary_line(const ComparisonTally& result) {
  return "wins=" + std::to_string(result.wins) +
         " ties=" + std::to_string(result.ties) +
         " loses=" + std::to_string(result.loses) +
         " unscored=" + std::to_string(result.unscored) +
         " items=" + std::to_string(result.items.size());
}

}  // namespace recycle::judge
