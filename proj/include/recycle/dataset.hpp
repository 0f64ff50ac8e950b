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

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace recycle {

enum class RecordSource { kAlpaca, kWizardLM, kGeneric };
enum class DatasetFormat { kAlpacaJson, kRecycledJson };

std::string_view to_string(RecordSource source) noexcept;
std::string_view to_string(DatasetFormat format) noexcept;

// One instruction/response pair of a base dataset.
struct DatasetRecord {
  std::string id;
  std::string instruction;
  std::string input;  // Alpaca's auxiliary field, empty when absent
  std::string response;
  RecordSource source = RecordSource::kGeneric;
  std::map<std::string, std::string> meta;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct DatasetFile {
  std::vector<DatasetRecord> records;
  DatasetFormat format = DatasetFormat::kAlpacaJson;
  std::filesystem::path path;
};

// Record identity: SHA-256 (lowercase hex) over
//
//   <len(instruction)>:<instruction><len(input)>:<input>
//   <len(response)>:<response><occurrence>
//
// concatenated without separators, where each len is the decimal byte length
// and occurrence is the decimal count of earlier entries in the same file with
// identical normalized (instruction, input, response). The length prefixes
// keep distinct field splits from colliding.
std::string make_record_id(std::string_view instruction, std::string_view input,
                           std::string_view response, std::size_t occurrence);

// Parses a JSON array of {instruction, input?, output[, meta]} objects.
// Instruction and input are whitespace-trimmed; output is kept verbatim.
// An alpaca file whose entries all lack `input` is tagged as WizardLM-sourced.
//
// Throws Error with kIoFailure (unreadable), kMalformedFile (not a JSON array
// of objects), kSchemaViolation (missing/empty/non-string fields; the message
// names the entry index) or kEmptyDataset.
DatasetFile load_dataset(const std::filesystem::path& path,
                         DatasetFormat format);

// Same as load_dataset, from an in-memory document. `origin` is used in
// messages only.
DatasetFile parse_dataset(std::string_view json_text, DatasetFormat format,
                          const std::filesystem::path& origin = {});

// Serializes in `file.format`. Byte output is a pure function of the records.
std::string serialize_dataset(const DatasetFile& file);

// Throws kEmptyDataset for zero records, kIoFailure when the write fails.
void write_dataset(const DatasetFile& file, const std::filesystem::path& path);

// instruction, or instruction + "\n\n" + input when input is non-empty.
std::string merged_instruction(const DatasetRecord& record);

// Number of records whose content repeats an earlier record's.
std::size_t duplicate_count(const DatasetFile& file);

}  // namespace recycle
