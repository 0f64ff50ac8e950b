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
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "recycle/gateway.hpp"

namespace recycle::judge {

// Which response the judge saw first.
enum class Order { kAB, kBA };
enum class Verdict { kWin, kTie, kLose };  // from A's point of view
enum class Outcome { kWin, kTie, kLoss };  // A within a single pass

std::string_view to_string(Order order) noexcept;
std::string_view to_string(Verdict verdict) noexcept;

inline constexpr double kMinScore = 1.0;
inline constexpr double kMaxScore = 10.0;

// Scores are always attributed to A and B, whatever the presentation order.
struct ScorePair {
  double score_a = 0.0;
  double score_b = 0.0;
  Order order = Order::kAB;
  std::string raw_judgment;
};

struct ScoredComparison {
  std::string instruction;
  std::string response_a;
  std::string response_b;
  ScorePair pass_ab;
  ScorePair pass_ba;
  Verdict verdict = Verdict::kTie;
};

extern const std::string_view kJudgeSystemPrompt;
inline constexpr std::string_view kQuestionHeading = "[Question]";
inline constexpr std::string_view kFirstAssistantOpen =
    "[The Start of Assistant 1's Answer]";
inline constexpr std::string_view kFirstAssistantClose =
    "[The End of Assistant 1's Answer]";
inline constexpr std::string_view kSecondAssistantOpen =
    "[The Start of Assistant 2's Answer]";
inline constexpr std::string_view kSecondAssistantClose =
    "[The End of Assistant 2's Answer]";

// Presents the instruction and the two responses as Assistant 1 and
// Assistant 2 in the given order, and asks for two scores from 1 to 10 on the
// first line followed by an explanation. Throws kPreconditionViolation on an
// empty argument.
std::string build_judge_prompt(std::string_view instruction,
                               std::string_view first,
                               std::string_view second);

// First two numeric literals of the first non-empty line, each required to be
// in [1, 10]. Throws kScoreParseError and nothing else.
std::pair<double, double> parse_scores(std::string_view raw_judgment);

Outcome pass_outcome(const ScorePair& pass) noexcept;

// Win if A wins both passes or wins one and ties the other; tie if both passes
// tie or the passes split; lose otherwise. Symmetric in argument order.
// Throws kPreconditionViolation if both passes share a presentation order.
Verdict adjudicate(const ScorePair& first, const ScorePair& second);

struct JudgeConfig {
  std::string judge_model = "gpt-4";
  double temperature = 0.0;
  int max_tokens = 512;
  std::int64_t seed = 0;
  // Extra samples per pass when the judgment does not parse.
  int parse_retries = 1;
  int concurrency = 1;
  oracle::RetryPolicy retry;
};

struct ItemResult {
  std::size_t index = 0;
  std::optional<ScoredComparison> comparison;  // empty when unscored
  std::string error;                           // why it is unscored
};

struct ComparisonTally {
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t loses = 0;
  std::size_t unscored = 0;
  std::vector<ItemResult> items;  // index order
};

// Tallies verdicts into wins/ties/loses; unscored items are counted apart.
ComparisonTally tally(std::vector<ItemResult> items);

// Judges item i in both orders, adjudicates and tallies. Items whose
// judgment never parses are reported as unscored. Gateway errors abort.
// Throws kPreconditionViolation when the three lists differ in length,
// kInterrupted when `stop` is raised first.
ComparisonTally run_comparison(oracle::OracleGateway& gateway,
                               const std::vector<std::string>& instructions,
                               const std::vector<std::string>& outputs_a,
                               const std::vector<std::string>& outputs_b,
                               const JudgeConfig& config = {},
                               const std::atomic<bool>* stop = nullptr);

nlohmann::ordered_json to_json(const ComparisonTally& tally);
std::string summary_line(const ComparisonTally& tally);

}  // namespace recycle::judge
