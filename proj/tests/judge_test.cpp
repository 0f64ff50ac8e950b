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

#include <random>

#include "golden_cases.hpp"
#include "test_support.hpp"

namespace recycle::judge {
namespace {

using recycle::testing::ScriptedChat;

ScorePair pass(double a, double b, Order order) {
  return ScorePair{a, b, order, ""};
}

// Outcome rules stated as a lookup table over (pass 1, pass 2) outcomes.
Verdict table_verdict(Outcome first, Outcome second) {
  static const std::map<std::pair<Outcome, Outcome>, Verdict> kTable = {
      {{Outcome::kWin, Outcome::kWin}, Verdict::kWin},
      {{Outcome::kWin, Outcome::kTie}, Verdict::kWin},
      {{Outcome::kTie, Outcome::kWin}, Verdict::kWin},
      {{Outcome::kWin, Outcome::kLoss}, Verdict::kTie},
      {{Outcome::kLoss, Outcome::kWin}, Verdict::kTie},
      {{Outcome::kTie, Outcome::kTie}, Verdict::kTie},
      {{Outcome::kTie, Outcome::kLoss}, Verdict::kLose},
      {{Outcome::kLoss, Outcome::kTie}, Verdict::kLose},
      {{Outcome::kLoss, Outcome::kLoss}, Verdict::kLose},
  };
  return kTable.at({first, second});
}

Outcome compare(int a, int b) {
  return a > b ? Outcome::kWin : a < b ? Outcome::kLoss : Outcome::kTie;
}

TEST(Adjudicate, WorkedExamples) {
  EXPECT_EQ(adjudicate(pass(9, 7, Order::kAB), pass(8, 6, Order::kBA)),
            Verdict::kWin);
  EXPECT_EQ(adjudicate(pass(9, 7, Order::kAB), pass(6, 8, Order::kBA)),
            Verdict::kTie);
  EXPECT_EQ(adjudicate(pass(5, 5, Order::kAB), pass(4, 6, Order::kBA)),
            Verdict::kLose);
}

TEST(Adjudicate, ExhaustiveAgainstRuleTable) {
  for (int a1 = 1; a1 <= 10; ++a1) {
    for (int b1 = 1; b1 <= 10; ++b1) {
      for (int a2 = 1; a2 <= 10; ++a2) {
        for (int b2 = 1; b2 <= 10; ++b2) {
          const auto ab = pass(a1, b1, Order::kAB);
          const auto ba = pass(a2, b2, Order::kBA);
          const Verdict verdict = adjudicate(ab, ba);
          ASSERT_EQ(verdict, table_verdict(compare(a1, b1), compare(a2, b2)))
              << a1 << " " << b1 << " " << a2 << " " << b2;
          ASSERT_EQ(adjudicate(ba, ab), verdict);
        }
      }
    }
  }
}

TEST(Adjudicate, SameOrderTwiceRejected) {
  EXPECT_ERROR_KIND(adjudicate(pass(9, 7, Order::kAB), pass(8, 6, Order::kAB)),
                    ErrorKind::kPreconditionViolation);
}

TEST(JudgePrompt, PositionsSwapAndScaleIsStated) {
  const auto ab = build_judge_prompt("Q", "alpha", "beta");
  const auto ba = build_judge_prompt("Q", "beta", "alpha");
  EXPECT_NE(ab, ba);
  std::string swapped = ab;
  swapped.replace(swapped.find("alpha"), 5, "@@@@@");
  swapped.replace(swapped.find("beta"), 4, "alpha");
  swapped.replace(swapped.find("@@@@@"), 5, "beta");
  EXPECT_EQ(swapped, ba);
  EXPECT_NE(ab.find("1 to 10"), std::string::npos);
  EXPECT_LT(ab.find(kFirstAssistantOpen), ab.find("alpha"));
  EXPECT_LT(ab.find("alpha"), ab.find(kSecondAssistantOpen));
  EXPECT_ERROR_KIND(build_judge_prompt("", "a", "b"),
                    ErrorKind::kPreconditionViolation);
  EXPECT_ERROR_KIND(build_judge_prompt("q", "a", ""),
                    ErrorKind::kPreconditionViolation);
}

TEST(JudgePrompt, MatchesGoldenSnapshot) {
  EXPECT_TRUE(recycle::testing::matches_golden(
      "judge_prompt.txt", recycle::testing::golden_judge_prompt()));
}

TEST(ParseScores, Grammar) {
  EXPECT_EQ(parse_scores("8 6\nAssistant 1 was better because..."),
            std::make_pair(8.0, 6.0));
  EXPECT_EQ(parse_scores("\n\n  7.5, 9\nreason"), std::make_pair(7.5, 9.0));
  EXPECT_EQ(parse_scores("Scores: 3/10 and 9"), std::make_pair(3.0, 10.0));
  // Only the first two numbers count, labels included.
  EXPECT_EQ(parse_scores("Assistant 1: 10 Assistant 2: 1"),
            std::make_pair(1.0, 10.0));
  EXPECT_EQ(parse_scores("x5 9.25"), std::make_pair(5.0, 9.25));
}

TEST(ParseScores, Errors) {
  EXPECT_ERROR_KIND(parse_scores("great answers!"), ErrorKind::kScoreParseError);
  EXPECT_ERROR_KIND(parse_scores("11 5"), ErrorKind::kScoreParseError);
  EXPECT_ERROR_KIND(parse_scores("0 5"), ErrorKind::kScoreParseError);
  EXPECT_ERROR_KIND(parse_scores("-3 5"), ErrorKind::kScoreParseError);
  EXPECT_ERROR_KIND(parse_scores("8\n6"), ErrorKind::kScoreParseError);
  EXPECT_ERROR_KIND(parse_scores(".5 9"), ErrorKind::kScoreParseError);
  EXPECT_ERROR_KIND(parse_scores(""), ErrorKind::kScoreParseError);
}

TEST(ParseScores, RandomInputsMapToPairOrDeclaredError) {
  std::mt19937_64 rng(31);
  const std::vector<std::string> alphabet = {"0", "1", "5", "9", "10", ".", "-",
                                             " ", "\n", "e", "x", ",", "/",
                                             "1e309", "\xC3\xA9"};
  for (int i = 0; i < 20000; ++i) {
    const auto text = recycle::testing::random_text(rng, alphabet, 10);
    try {
      const auto [a, b] = parse_scores(text);
      EXPECT_GE(a, kMinScore);
      EXPECT_LE(a, kMaxScore);
      EXPECT_GE(b, kMinScore);
      EXPECT_LE(b, kMaxScore);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kScoreParseError) << text;
    }
  }
}

TEST(Tally, Counting) {
  std::vector<ItemResult> items(5);
  const Verdict verdicts[] = {Verdict::kWin, Verdict::kWin, Verdict::kTie,
                              Verdict::kLose};
  for (std::size_t i = 0; i < 4; ++i) {
    items[i].index = i;
    items[i].comparison = ScoredComparison{};
    items[i].comparison->verdict = verdicts[i];
  }
  items[4].index = 4;
  const auto result = tally(items);
  EXPECT_EQ(result.wins, 2u);
  EXPECT_EQ(result.ties, 1u);
  EXPECT_EQ(result.loses, 1u);
  EXPECT_EQ(result.unscored, 1u);
  EXPECT_EQ(summary_line(result), "wins=2 ties=1 loses=1 unscored=1 items=5");
}

TEST(RunComparison, ConstantTieJudge) {
  auto gateway = recycle::testing::chat_gateway(
      oracle::make_mock_chat_backend("judge-tie"));
  const auto result = run_comparison(*gateway, {"q1", "q2", "q3"},
                                     {"a1", "a2", "a3"}, {"b1", "b2", "b3"});
  EXPECT_EQ(result.ties, 3u);
  EXPECT_EQ(result.wins + result.loses + result.unscored, 0u);
  EXPECT_EQ(gateway->stats().chat_calls, 6u);
}

TEST(RunComparison, ScoresAreAttributedToResponsesNotPositions) {
  // Always prefers whichever answer is presented first.
  auto chat = std::make_shared<ScriptedChat>(
      [](const oracle::ChatRequest&, int) { return std::string("9 3\nfirst"); });
  auto gateway = recycle::testing::chat_gateway(chat);
  const auto result = run_comparison(*gateway, {"q"}, {"long answer"}, {"short"});
  ASSERT_TRUE(result.items[0].comparison);
  const auto& c = *result.items[0].comparison;
  EXPECT_EQ(c.pass_ab.score_a, 9);
  EXPECT_EQ(c.pass_ba.score_a, 3);
  EXPECT_EQ(c.verdict, Verdict::kTie);
  const auto requests = chat->requests();
  ASSERT_EQ(requests.size(), 2u);
  const auto& ba_prompt = requests[1].messages.back().content;
  EXPECT_LT(ba_prompt.find("short"), ba_prompt.find("long answer"));
}

TEST(RunComparison, LengthJudgeFavoursLongerAnswer) {
  auto gateway = recycle::testing::chat_gateway(
      oracle::make_mock_chat_backend("judge-length"));
  const auto result =
      run_comparison(*gateway, {"q1", "q2"}, {"a much longer answer", "x"},
                     {"short", "a much longer answer"});
  EXPECT_EQ(result.wins, 1u);
  EXPECT_EQ(result.loses, 1u);
}

TEST(RunComparison, UnparseableItemIsUnscoredAfterRetries) {
  auto chat = std::make_shared<ScriptedChat>(
      [](const oracle::ChatRequest& request, int) {
        if (request.messages.back().content.find("broken") != std::string::npos) {
          return std::string("I refuse to score.");
        }
        return std::string("8 6\nok");
      });
  auto gateway = recycle::testing::chat_gateway(chat);
  JudgeConfig config;
  config.parse_retries = 1;
  const auto result = run_comparison(*gateway, {"q1", "broken q", "q3"},
                                     {"a", "a", "a"}, {"b", "b", "b"}, config);
  EXPECT_EQ(result.unscored, 1u);
  EXPECT_EQ(result.ties, 2u);  // 8-6 for the first shown flips between orders
  EXPECT_FALSE(result.items[1].comparison);
  EXPECT_NE(result.items[1].error.find("ab pass"), std::string::npos);
  // Two samples for the broken item's first pass; the second is never run.
  EXPECT_EQ(chat->calls(), 2 * 2 + 2);
  const auto doc = to_json(result);
  EXPECT_EQ(doc["items"][1]["verdict"], "unscored");
  EXPECT_TRUE(doc["items"][1]["scores"].is_null());
  EXPECT_EQ(doc["items"][0]["scores"]["ab"]["a"], 8.0);
  EXPECT_EQ(doc["items"][0]["scores"]["ba"]["a"], 6.0);
}

TEST(RunComparison, EmptyResponseIsUnscoredWithoutCalls) {
  auto chat = std::make_shared<ScriptedChat>(
      [](const oracle::ChatRequest&, int) { return std::string("5 5"); });
  auto gateway = recycle::testing::chat_gateway(chat);
  const auto result = run_comparison(*gateway, {"q"}, {""}, {"b"});
  EXPECT_EQ(result.unscored, 1u);
  EXPECT_EQ(chat->calls(), 0);
}

TEST(RunComparison, MisalignedListsRejected) {
  auto gateway = recycle::testing::chat_gateway(
      oracle::make_mock_chat_backend("judge-tie"));
  EXPECT_ERROR_KIND(run_comparison(*gateway, {"q1", "q2"}, {"a"}, {"b", "c"}),
                    ErrorKind::kPreconditionViolation);
}

TEST(RunComparison, ConcurrentRunMatchesSequential) {
  std::vector<std::string> q, a, b;
  for (int i = 0; i < 40; ++i) {
    q.push_back("question " + std::to_string(i));
    a.push_back(std::string(static_cast<std::size_t>(1 + i % 7), 'a'));
    b.push_back(std::string(static_cast<std::size_t>(1 + i % 5), 'b'));
  }
  auto sequential = run_comparison(
      *recycle::testing::chat_gateway(oracle::make_mock_chat_backend("judge-length")),
      q, a, b);
  JudgeConfig config;
  config.concurrency = 8;
  auto parallel = run_comparison(
      *recycle::testing::chat_gateway(oracle::make_mock_chat_backend("judge-length")),
      q, a, b, config);
  EXPECT_EQ(to_json(sequential).dump(), to_json(parallel).dump());
}

}  // namespace
}  // namespace recycle::judge
