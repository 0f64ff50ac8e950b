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

#include <cstdlib>
#include <string>

#include <gtest/gtest.h>

#include "recycle/dataset.hpp"
#include "recycle/judge.hpp"
#include "recycle/reflection.hpp"
#include "recycle/util.hpp"
#include "test_support.hpp"

// Frozen prompt snapshots. Set RECYCLE_UPDATE_GOLDEN=1 to rewrite them after
// an intentional template change, then review the diff by hand.
namespace recycle::testing {

inline DatasetRecord golden_record() {
  DatasetRecord record;
  record.instruction = "Sum the numbers.";
  record.input = "1 2 3";
  record.response = "6";
  return record;
}

inline constexpr const char* kGoldenInstructionRewrite =
    "Add the numbers 1, 2 and 3, showing each intermediate sum.";
inline constexpr const char* kGoldenResponseRewrite =
    "First, 1 + 2 = 3. Then, 3 + 3 = 6. The total is 6.";

inline std::string golden_instruction_prompt() {
  return build_instruction_reflection_prompt(golden_record(),
                                             default_instruction_criteria());
}

inline std::string golden_response_prompt() {
  return build_response_reflection_prompt(kGoldenInstructionRewrite,
                                          kGoldenResponseRewrite,
                                          default_response_criteria());
}

inline std::string golden_judge_prompt() {
  return judge::build_judge_prompt(
      "What is the capital of France?", "The capital of France is Paris.",
      "Paris is the capital and largest city of France, on the Seine.");
}

// Compares `actual` with tests/golden/<name>; returns true on a match.
inline bool matches_golden(const std::string& name, const std::string& actual) {
  const auto path = source_path("tests/golden/" + name);
  if (const char* update = std::getenv("RECYCLE_UPDATE_GOLDEN");
      update != nullptr && std::string(update) == "1") {
    write_file_atomic(path, actual);
  }
  if (!std::filesystem::exists(path)) return false;
  return read_file(path) == actual;
}

}  // namespace recycle::testing
