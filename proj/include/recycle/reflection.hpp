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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "recycle/dataset.hpp"
#include "recycle/gateway.hpp"

namespace recycle {

enum class ReflectionPhase { kInstruction, kResponse };

std::string_view to_string(ReflectionPhase phase) noexcept;

struct Criterion {
  std::string name;
  std::optional<std::string> elaboration;
};

// Ordered evaluation axes for one reflection phase. Names are unique.
struct CriteriaSet {
  ReflectionPhase phase = ReflectionPhase::kInstruction;
  std::vector<Criterion> criteria;

  // Throws kEmptyCriteria when empty, kInvalidConfig on duplicate or blank
  // names.
  void validate() const;
};

// Complexity, level of detail, knowledge, ambiguity, reasoning.
CriteriaSet default_instruction_criteria();
// Helpfulness, relevance, accuracy, level of details.
CriteriaSet default_response_criteria();

struct CriteriaConfig {
  CriteriaSet instruction = default_instruction_criteria();
  CriteriaSet response = default_response_criteria();
};

// Reads {"instruction": [{name, elaboration?}...], "response": [...]}.
// A phase missing from the file keeps its default list.
CriteriaConfig load_criteria_file(const std::filesystem::path& path);
CriteriaConfig parse_criteria(std::string_view json_text);
nlohmann::ordered_json to_json(const CriteriaSet& set);

// Output grammar the oracle is asked to follow.
inline constexpr std::string_view kNewInstructionMarker = "[New Instruction]";
inline constexpr std::string_view kNewAnswerMarker = "[New Answer]";
inline constexpr std::string_view kEndMarker = "[End]";

// Section headings of the reflection prompts.
inline constexpr std::string_view kOriginalInstructionHeading =
    "### Original Instruction";
inline constexpr std::string_view kOriginalAnswerHeading =
    "### Original Answer";
inline constexpr std::string_view kInstructionHeading = "### Instruction";
inline constexpr std::string_view kAnswerHeading = "### Answer";
inline constexpr std::string_view kCriteriaHeading = "### Criteria";
inline constexpr std::string_view kTaskHeading = "### Task";

// System turn shared by both phases.
extern const std::string_view kReflectionSystemPrompt;

// Phase 1 prompt: the original pair, then the criteria, then the request to
// critique each criterion and emit a new pair between the markers.
std::string build_instruction_reflection_prompt(const DatasetRecord& record,
                                                const CriteriaSet& criteria);

// Phase 2 prompt: conditions only on the phase-1 pair, never on the original.
std::string build_response_reflection_prompt(std::string_view x_ins,
                                             std::string_view y_ins,
                                             const CriteriaSet& criteria);

// Extracts the trimmed contents of the last [New Instruction] span and the
// last [New Answer] span. A span runs from its opening marker to the next
// [End], or to the next opening marker if that comes first; a span with
// neither is unterminated. Throws kMarkerMissing or kEmptySpan; never
// anything else.
std::pair<std::string, std::string> parse_recycled_pair(
    std::string_view raw_output);

// As above, for the last [New Answer] span only.
std::string parse_recycled_response(std::string_view raw_output);

struct ReflectionTranscript {
  ReflectionPhase phase = ReflectionPhase::kInstruction;
  std::string prompt;
  std::string raw_output;  // output of the final attempt, verbatim
  bool parsed_ok = false;
  int attempts = 0;
};

enum class RecycleStatus { kRecycled, kInstructionOnly, kFallbackOriginal };

std::string_view to_string(RecycleStatus status) noexcept;
std::optional<RecycleStatus> recycle_status_from_string(
    std::string_view text) noexcept;

struct RecycledRecord {
  std::string original_id;
  std::string x_ins;
  std::string y_ins;
  std::string y_res;
  std::vector<ReflectionTranscript> transcripts;
  RecycleStatus status = RecycleStatus::kFallbackOriginal;
  std::string oracle_model;
};

nlohmann::ordered_json to_json(const RecycledRecord& record);
RecycledRecord recycled_record_from_json(const nlohmann::json& doc);

enum class PhaseSelection { kBoth, kInstructionOnly };

struct RecycleConfig {
  std::string oracle_model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 2048;
  std::int64_t seed = 0;
  // Extra samples per phase when the output does not parse. Each retry bumps
  // the request seed, so it is a distinct request and never a cache hit.
  int parse_retries = 2;
  PhaseSelection phases = PhaseSelection::kBoth;
  CriteriaConfig criteria;
  oracle::RetryPolicy retry;
};

nlohmann::ordered_json to_json(const RecycleConfig& config);

// Runs instruction reflection then response reflection for one record.
// Parse failures are absorbed into the status; gateway errors propagate.
RecycledRecord recycle_record(const DatasetRecord& record,
                              const RecycleConfig& config,
                              oracle::OracleGateway& gateway);

struct RecycleSummary {
  std::size_t recycled = 0;
  std::size_t instruction_only = 0;
  std::size_t fallback_original = 0;
  std::size_t resumed = 0;  // taken from the checkpoint without oracle calls

  std::size_t total() const noexcept {
    return recycled + instruction_only + fallback_original;
  }
};

nlohmann::ordered_json to_json(const RecycleSummary& summary);
std::string format_summary_table(const RecycleSummary& summary);

struct RecycleRunOptions {
  int concurrency = 1;
  // JSON Lines, one {"id", "record"} object per completed record.
  std::optional<std::filesystem::path> checkpoint;
  bool resume = false;
  // Checked between records; set it to stop after in-flight records finish.
  const std::atomic<bool>* stop = nullptr;
  // Called under the checkpoint lock after each newly completed record.
  std::function<void(std::size_t completed, std::size_t total)> on_progress;
};

struct RecycleRun {
  std::vector<RecycledRecord> records;  // input order
  RecycleSummary summary;
};

// Fans records out over a worker pool sharing `gateway`. Every completed
// record is appended to the checkpoint before the next one is picked up by
// that worker; with `resume`, checkpointed records are reused as-is.
//
// Throws kEmptyDataset, kInterrupted (stop requested; progress is
// checkpointed) or the first fatal gateway error (after checkpointing).
RecycleRun recycle_dataset(const DatasetFile& dataset,
                           const RecycleConfig& config,
                           oracle::OracleGateway& gateway,
                           const RecycleRunOptions& options = {});

// recycled_json view of a run: instruction = x_ins, input empty,
// output = y_res, meta = {original_id, status, oracle_model}.
DatasetFile to_recycled_dataset(const std::vector<RecycledRecord>& records);

}  // namespace recycle
