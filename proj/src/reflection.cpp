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

#include "recycle/reflection.hpp"

#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>

#include "recycle/error.hpp"
#include "recycle/parallel.hpp"
#include "recycle/util.hpp"

namespace recycle {
namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

void append_criteria(std::string& out, const CriteriaSet& set) {
  int index = 1;
  for (const auto& criterion : set.criteria) {
    out += std::to_string(index++);
    out += ". ";
    out += criterion.name;
    if (criterion.elaboration && !criterion.elaboration->empty()) {
      out += ": ";
      out += *criterion.elaboration;
    }
    out += '\n';
  }
}

void require_phase(const CriteriaSet& set, ReflectionPhase phase) {
  if (set.criteria.empty()) {
    throw Error(ErrorKind::kEmptyCriteria,
                std::string(to_string(phase)) + " criteria set is empty");
  }
  if (set.phase != phase) {
    throw Error(ErrorKind::kPreconditionViolation,
                "expected " + std::string(to_string(phase)) +
                    " criteria, got " + std::string(to_string(set.phase)));
  }
}

// Trimmed content of the last span opened by `opener`.
std::string last_span(std::string_view text, std::string_view opener) {
  const auto open = text.rfind(opener);
  if (open == std::string_view::npos) {
    throw Error(ErrorKind::kMarkerMissing,
                "no " + std::string(opener) + " marker in oracle output");
  }
  const auto start = open + opener.size();
  auto end = std::string_view::npos;
  for (std::string_view terminator :
       {kEndMarker, kNewInstructionMarker, kNewAnswerMarker}) {
    end = std::min(end, text.find(terminator, start));
  }
  if (end == std::string_view::npos) {
    throw Error(ErrorKind::kMarkerMissing,
                "unterminated " + std::string(opener) + " span");
  }
  const auto content = trim(text.substr(start, end - start));
  if (content.empty()) {
    throw Error(ErrorKind::kEmptySpan,
                "empty " + std::string(opener) + " span");
  }
  return std::string(content);
}

CriteriaSet parse_criteria_list(const json& list, ReflectionPhase phase) {
  if (!list.is_array()) {
    throw Error(ErrorKind::kInvalidConfig,
                std::string(to_string(phase)) + " criteria must be an array");
  }
  CriteriaSet set{phase, {}};
  for (const auto& entry : list) {
    Criterion criterion;
    if (entry.is_string()) {
      criterion.name = entry.get<std::string>();
    } else if (entry.is_object() && entry.contains("name") &&
               entry["name"].is_string()) {
      criterion.name = entry["name"].get<std::string>();
      if (auto it = entry.find("elaboration");
          it != entry.end() && it->is_string()) {
        criterion.elaboration = it->get<std::string>();
      }
    } else {
      throw Error(ErrorKind::kInvalidConfig,
                  "criterion entries need a string `name`");
    }
    set.criteria.push_back(std::move(criterion));
  }
  set.validate();
  return set;
}

ordered_json to_json(const ReflectionTranscript& transcript) {
  ordered_json doc;
  doc["phase"] = to_string(transcript.phase);
  doc["prompt"] = transcript.prompt;
  doc["raw_output"] = transcript.raw_output;
  doc["parsed_ok"] = transcript.parsed_ok;
  doc["attempts"] = transcript.attempts;
  return doc;
}

struct PhaseOutcome {
  ReflectionTranscript transcript;
  bool ok = false;
};

// Samples the oracle until `parse` accepts the output or retries run out.
template <typename Parse>
PhaseOutcome run_phase(ReflectionPhase phase, std::string prompt,
                       const RecycleConfig& config,
                       oracle::OracleGateway& gateway, Parse&& parse) {
  PhaseOutcome outcome;
  outcome.transcript.phase = phase;
  outcome.transcript.prompt = std::move(prompt);
  const int samples = 1 + std::max(0, config.parse_retries);
  for (int attempt = 0; attempt < samples; ++attempt) {
    oracle::ChatRequest request;
    request.model_id = config.oracle_model;
    request.messages = {
        {oracle::Role::kSystem, std::string(kReflectionSystemPrompt)},
        {oracle::Role::kUser, outcome.transcript.prompt}};
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    request.seed = config.seed + attempt;
    const auto response = gateway.complete(request, config.retry);
    outcome.transcript.raw_output = response.text;
    outcome.transcript.attempts = attempt + 1;
    try {
      parse(response.text);
      outcome.transcript.parsed_ok = true;
      outcome.ok = true;
      return outcome;
    } catch (const Error& error) {
      if (error.kind() != ErrorKind::kMarkerMissing &&
          error.kind() != ErrorKind::kEmptySpan) {
        throw;
      }
    }
  }
  return outcome;
}

// Valid checkpoint lines keyed by record id. A torn trailing line from an
// interrupted write is dropped.
std::unordered_map<std::string, RecycledRecord> read_checkpoint(
    const std::filesystem::path& path, std::string& valid_lines) {
  std::unordered_map<std::string, RecycledRecord> records;
  std::ifstream in(path, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      const auto doc = json::parse(line);
      auto record = recycled_record_from_json(doc.at("record"));
      const auto id = doc.at("id").get<std::string>();
      if (id != record.original_id) continue;
      records.insert_or_assign(id, std::move(record));
      valid_lines += line;
      valid_lines += '\n';
    } catch (const std::exception&) {
      // Torn or foreign line.
    }
  }
  return records;
}

}  // namespace

const std::string_view kReflectionSystemPrompt =
    "You are a meticulous reviewer who improves the quality of "
    "instruction-tuning data.";

std::string_view to_string(ReflectionPhase phase) noexcept {
  return phase == ReflectionPhase::kInstruction ? "instruction" : "response";
}

void CriteriaSet::validate() const {
  if (criteria.empty()) {
    throw Error(ErrorKind::kEmptyCriteria,
                std::string(to_string(phase)) + " criteria set is empty");
  }
  std::set<std::string_view> names;
  for (const auto& criterion : criteria) {
    if (trim(criterion.name).empty()) {
      throw Error(ErrorKind::kInvalidConfig, "criterion with a blank name");
    }
    if (!names.insert(criterion.name).second) {
      throw Error(ErrorKind::kInvalidConfig,
                  "duplicate criterion name: " + criterion.name);
    }
  }
}

CriteriaSet default_instruction_criteria() {
  return {ReflectionPhase::kInstruction,
          {{"the Complexity of the Topic", std::nullopt},
           {"the Level of Detail Required for response", std::nullopt},
           {"Knowledge Required for response", std::nullopt},
           {"the Ambiguity of the Instruction", std::nullopt},
           {"Logical Reasoning or Problem-Solving Involved", std::nullopt}}};
}

CriteriaSet default_response_criteria() {
  return {ReflectionPhase::kResponse,
          {{"Helpfulness", std::nullopt},
           {"Relevance", std::nullopt},
           {"Accuracy", std::nullopt},
           {"Level of Details", std::nullopt}}};
}

CriteriaConfig parse_criteria(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidConfig,
                std::string("criteria file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorKind::kInvalidConfig, "criteria file must be an object");
  }
  CriteriaConfig config;
  if (doc.contains("instruction")) {
    config.instruction =
        parse_criteria_list(doc["instruction"], ReflectionPhase::kInstruction);
  }
  if (doc.contains("response")) {
    config.response =
        parse_criteria_list(doc["response"], ReflectionPhase::kResponse);
  }
  return config;
}

CriteriaConfig load_criteria_file(const std::filesystem::path& path) {
  return parse_criteria(read_file(path));
}

ordered_json to_json(const CriteriaSet& set) {
  ordered_json list = ordered_json::array();
  for (const auto& criterion : set.criteria) {
    ordered_json entry;
    entry["name"] = criterion.name;
    if (criterion.elaboration) entry["elaboration"] = *criterion.elaboration;
    list.push_back(std::move(entry));
  }
  return list;
}

std::string build_instruction_reflection_prompt(const DatasetRecord& record,
                                                const CriteriaSet& criteria) {
  require_phase(criteria, ReflectionPhase::kInstruction);
  std::string prompt;
  prompt +=
      "We would like your help improving one example from an "
      "instruction-tuning dataset. Here is the example as it currently "
      "stands.\n\n";
  prompt += kOriginalInstructionHeading;
  prompt += '\n';
  prompt += merged_instruction(record);
  prompt += "\n\n";
  prompt += kOriginalAnswerHeading;
  prompt += '\n';
  prompt += record.response;
  prompt += "\n\n";
  prompt += kCriteriaHeading;
  prompt += '\n';
  append_criteria(prompt, criteria);
  prompt += '\n';
  prompt += kTaskHeading;
  prompt += '\n';
  prompt +=
      "First, reflect on the instruction and its answer. Write a brief "
      "critique for each criterion listed above, one criterion at a time, "
      "pointing out where the instruction or its answer falls short.\n"
      "Then, guided by your critique, write a new and improved instruction "
      "together with a complete answer to it. The new instruction must be "
      "self-contained, so that it can be answered without seeing the "
      "original one.\n"
      "Place the new instruction between [New Instruction] and [End], and "
      "the new answer between [New Answer] and [End], using exactly this "
      "layout:\n"
      "[New Instruction] your instruction [End]\n"
      "[New Answer] your answer [End]\n";
  return prompt;
}

std::string build_response_reflection_prompt(std::string_view x_ins,
                                             std::string_view y_ins,
                                             const CriteriaSet& criteria) {
  require_phase(criteria, ReflectionPhase::kResponse);
  if (trim(x_ins).empty() || trim(y_ins).empty()) {
    throw Error(ErrorKind::kPreconditionViolation,
                "response reflection needs a non-empty instruction and answer");
  }
  std::string prompt;
  prompt +=
      "We would like your help improving the answer to an instruction.\n\n";
  prompt += kInstructionHeading;
  prompt += '\n';
  prompt += x_ins;
  prompt += "\n\n";
  prompt += kAnswerHeading;
  prompt += '\n';
  prompt += y_ins;
  prompt += "\n\n";
  prompt += kCriteriaHeading;
  prompt += '\n';
  append_criteria(prompt, criteria);
  prompt += '\n';
  prompt += kTaskHeading;
  prompt += '\n';
  prompt +=
      "First, reflect on the answer. Write a brief critique for each "
      "criterion listed above, one criterion at a time.\n"
      "Then, guided by your critique, write an improved answer to the "
      "instruction.\n"
      "Place the improved answer between [New Answer] and [End], using "
      "exactly this layout:\n"
      "[New Answer] your answer [End]\n";
  return prompt;
}

std::pair<std::string, std::string> parse_recycled_pair(
    std::string_view raw_output) {
  auto instruction = last_span(raw_output, kNewInstructionMarker);
  auto answer = last_span(raw_output, kNewAnswerMarker);
  return {std::move(instruction), std::move(answer)};
}

std::string parse_recycled_response(std::string_view raw_output) {
  return last_span(raw_output, kNewAnswerMarker);
}

std::string_view to_string(RecycleStatus status) noexcept {
  switch (status) {
    case RecycleStatus::kRecycled:
      return "recycled";
    case RecycleStatus::kInstructionOnly:
      return "instruction_only";
    case RecycleStatus::kFallbackOriginal:
      return "fallback_original";
  }
  return "fallback_original";
}

std::optional<RecycleStatus> recycle_status_from_string(
    std::string_view text) noexcept {
  if (text == "recycled") return RecycleStatus::kRecycled;
  if (text == "instruction_only") return RecycleStatus::kInstructionOnly;
  if (text == "fallback_original") return RecycleStatus::kFallbackOriginal;
  return std::nullopt;
}

ordered_json to_json(const RecycledRecord& record) {
  ordered_json doc;
  doc["original_id"] = record.original_id;
  doc["status"] = to_string(record.status);
  doc["oracle_model"] = record.oracle_model;
  doc["x_ins"] = record.x_ins;
  doc["y_ins"] = record.y_ins;
  doc["y_res"] = record.y_res;
  ordered_json transcripts = ordered_json::array();
  for (const auto& transcript : record.transcripts) {
    transcripts.push_back(to_json(transcript));
  }
  doc["transcripts"] = std::move(transcripts);
  return doc;
}

RecycledRecord recycled_record_from_json(const json& doc) {
  RecycledRecord record;
  record.original_id = doc.at("original_id").get<std::string>();
  const auto status =
      recycle_status_from_string(doc.at("status").get<std::string>());
  if (!status) {
    throw Error(ErrorKind::kMalformedFile, "unknown recycle status");
  }
  record.status = *status;
  record.oracle_model = doc.at("oracle_model").get<std::string>();
  record.x_ins = doc.at("x_ins").get<std::string>();
  record.y_ins = doc.at("y_ins").get<std::string>();
  record.y_res = doc.at("y_res").get<std::string>();
  for (const auto& entry : doc.at("transcripts")) {
    ReflectionTranscript transcript;
    transcript.phase = entry.at("phase").get<std::string>() == "response"
                           ? ReflectionPhase::kResponse
                           : ReflectionPhase::kInstruction;
    transcript.prompt = entry.at("prompt").get<std::string>();
    transcript.raw_output = entry.at("raw_output").get<std::string>();
    transcript.parsed_ok = entry.at("parsed_ok").get<bool>();
    transcript.attempts = entry.at("attempts").get<int>();
    record.transcripts.push_back(std::move(transcript));
  }
  return record;
}

ordered_json to_json(const RecycleConfig& config) {
  ordered_json doc;
  doc["oracle_model"] = config.oracle_model;
  doc["temperature"] = config.temperature;
  doc["max_tokens"] = config.max_tokens;
  doc["seed"] = config.seed;
  doc["parse_retries"] = config.parse_retries;
  doc["phases"] = config.phases == PhaseSelection::kBoth ? "both"
                                                         : "instruction-only";
  doc["criteria"] = {{"instruction", to_json(config.criteria.instruction)},
                     {"response", to_json(config.criteria.response)}};
  doc["retry"] = {{"max_attempts", config.retry.max_attempts},
                  {"initial_delay_ms", config.retry.initial_delay.count()},
                  {"multiplier", config.retry.multiplier},
                  {"max_delay_ms", config.retry.max_delay.count()}};
  return doc;
}

RecycledRecord recycle_record(const DatasetRecord& record,
                              const RecycleConfig& config,
                              oracle::OracleGateway& gateway) {
  RecycledRecord out;
  out.original_id = record.id;
  out.oracle_model = config.oracle_model;

  std::pair<std::string, std::string> pair;
  auto phase1 = run_phase(
      ReflectionPhase::kInstruction,
      build_instruction_reflection_prompt(record,
                                          config.criteria.instruction),
      config, gateway,
      [&](std::string_view text) { pair = parse_recycled_pair(text); });
  out.transcripts.push_back(std::move(phase1.transcript));

  if (!phase1.ok) {
    out.status = RecycleStatus::kFallbackOriginal;
    out.x_ins = merged_instruction(record);
    out.y_ins = record.response;
    out.y_res = record.response;
    return out;
  }
  out.x_ins = std::move(pair.first);
  out.y_ins = std::move(pair.second);

  if (config.phases == PhaseSelection::kInstructionOnly) {
    out.status = RecycleStatus::kInstructionOnly;
    out.y_res = out.y_ins;
    return out;
  }

  std::string improved;
  auto phase2 = run_phase(
      ReflectionPhase::kResponse,
      build_response_reflection_prompt(out.x_ins, out.y_ins,
                                       config.criteria.response),
      config, gateway,
      [&](std::string_view text) { improved = parse_recycled_response(text); });
  out.transcripts.push_back(std::move(phase2.transcript));

  if (phase2.ok) {
    out.status = RecycleStatus::kRecycled;
    out.y_res = std::move(improved);
  } else {
    out.status = RecycleStatus::kInstructionOnly;
    out.y_res = out.y_ins;
  }
  return out;
}

ordered_json to_json(const RecycleSummary& summary) {
  ordered_json doc;
  doc["total"] = summary.total();
  doc["recycled"] = summary.recycled;
  doc["instruction_only"] = summary.instruction_only;
  doc["fallback_original"] = summary.fallback_original;
  doc["resumed"] = summary.resumed;
  return doc;
}

std::string format_summary_table(const RecycleSummary& summary) {
  std::ostringstream out;
  auto row = [&](std::string_view label, std::size_t value) {
    out << "  " << label;
    for (std::size_t pad = label.size(); pad < 20; ++pad) out << ' ';
    out << value << '\n';
  };
  out << "status              records\n";
  row("recycled", summary.recycled);
  row("instruction_only", summary.instruction_only);
  row("fallback_original", summary.fallback_original);
  row("total", summary.total());
  return out.str();
}

RecycleRun recycle_dataset(const DatasetFile& dataset,
                           const RecycleConfig& config,
                           oracle::OracleGateway& gateway,
                           const RecycleRunOptions& options) {
  if (dataset.records.empty()) {
    throw Error(ErrorKind::kEmptyDataset, "nothing to recycle");
  }
  config.criteria.instruction.validate();
  config.criteria.response.validate();

  const std::size_t n = dataset.records.size();
  std::vector<std::optional<RecycledRecord>> results(n);
  RecycleRun run;

  std::ofstream checkpoint;
  if (options.checkpoint) {
    std::string valid_lines;
    std::unordered_map<std::string, RecycledRecord> resumed;
    if (options.resume && std::filesystem::exists(*options.checkpoint)) {
      resumed = read_checkpoint(*options.checkpoint, valid_lines);
    }
    write_file_atomic(*options.checkpoint, valid_lines);
    for (std::size_t i = 0; i < n; ++i) {
      if (auto it = resumed.find(dataset.records[i].id); it != resumed.end()) {
        results[i] = std::move(it->second);
        ++run.summary.resumed;
      }
    }
    checkpoint.open(*options.checkpoint, std::ios::binary | std::ios::app);
    if (!checkpoint) {
      throw Error(ErrorKind::kIoFailure, "cannot append to checkpoint " +
                                             options.checkpoint->string());
    }
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i]) pending.push_back(i);
  }

  std::mutex commit_mutex;
  std::size_t completed = run.summary.resumed;
  const bool finished = parallel_for(
      pending.size(), options.concurrency,
      [&](std::size_t k) {
        const std::size_t i = pending[k];
        auto record = recycle_record(dataset.records[i], config, gateway);
        std::lock_guard lock(commit_mutex);
        if (checkpoint.is_open()) {
          ordered_json line;
          line["id"] = record.original_id;
          line["record"] = to_json(record);
          checkpoint << line.dump() << '\n';
          checkpoint.flush();
          if (!checkpoint) {
            throw Error(ErrorKind::kIoFailure, "checkpoint write failed");
          }
        }
        results[i] = std::move(record);
        ++completed;
        if (options.on_progress) options.on_progress(completed, n);
      },
      options.stop);

  if (!finished) {
    throw Error(ErrorKind::kInterrupted,
                "stopped after " + std::to_string(completed) + " of " +
                    std::to_string(n) + " records");
  }

  run.records.reserve(n);
  for (auto& result : results) {
    switch (result->status) {
      case RecycleStatus::kRecycled:
        ++run.summary.recycled;
        break;
      case RecycleStatus::kInstructionOnly:
        ++run.summary.instruction_only;
        break;
      case RecycleStatus::kFallbackOriginal:
        ++run.summary.fallback_original;
        break;
    }
    run.records.push_back(std::move(*result));
  }
  return run;
}

DatasetFile to_recycled_dataset(const std::vector<RecycledRecord>& records) {
  DatasetFile file;
  file.format = DatasetFormat::kRecycledJson;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& recycled : records) {
    DatasetRecord record;
    record.instruction = std::string(trim(recycled.x_ins));
    record.response = recycled.y_res;
    record.source = RecordSource::kGeneric;
    record.meta = {{"original_id", recycled.original_id},
                   {"status", std::string(to_string(recycled.status))},
                   {"oracle_model", recycled.oracle_model}};
    const auto occurrence =
        seen[std::to_string(record.instruction.size()) + ":" +
             record.instruction + "0:" + std::to_string(record.response.size()) +
             ":" + record.response]++;
    record.id = make_record_id(record.instruction, "", record.response,
                               occurrence);
    file.records.push_back(std::move(record));
  }
  return file;
}

}  // namespace recycle
