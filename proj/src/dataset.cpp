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

#include "recycle/dataset.hpp"

#include <nlohmann/json.hpp>

#include <unordered_map>

#include "recycle/error.hpp"
#include "recycle/util.hpp"

namespace recycle {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string content_key(std::string_view instruction, std::string_view input,
                        std::string_view response) {
  std::string key;
  key.reserve(instruction.size() + input.size() + response.size() + 32);
  for (std::string_view field : {instruction, input, response}) {
    key += std::to_string(field.size());
    key += ':';
    key += field;
  }
  return key;
}

std::string entry_label(const std::filesystem::path& origin,
                        std::size_t index) {
  std::string label = origin.empty() ? std::string("dataset")
                                     : origin.string();
  return label + ": entry " + std::to_string(index);
}

std::string required_string(const ordered_json& entry, const char* key,
                            const std::filesystem::path& origin,
                            std::size_t index) {
  auto it = entry.find(key);
  if (it == entry.end() || it->is_null()) {
    throw Error(ErrorKind::kSchemaViolation, entry_label(origin, index) +
                                                 ": missing `" + key + "`");
  }
  if (!it->is_string()) {
    throw Error(ErrorKind::kSchemaViolation, entry_label(origin, index) +
                                                 ": `" + key +
                                                 "` is not a string");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(RecordSource source) noexcept {
  switch (source) {
    case RecordSource::kAlpaca:
      return "alpaca";
    case RecordSource::kWizardLM:
      return "wizardlm";
    case RecordSource::kGeneric:
      return "generic";
  }
  return "generic";
}

std::string_view to_string(DatasetFormat format) noexcept {
  return format == DatasetFormat::kAlpacaJson ? "alpaca_json"
                                              : "recycled_json";
}

std::string make_record_id(std::string_view instruction, std::string_view input,
                           std::string_view response, std::size_t occurrence) {
  return sha256_hex(content_key(instruction, input, response) +
                    std::to_string(occurrence));
}

DatasetFile parse_dataset(std::string_view json_text, DatasetFormat format,
                          const std::filesystem::path& origin) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kMalformedFile,
                (origin.empty() ? std::string("dataset") : origin.string()) +
                    ": " + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorKind::kMalformedFile,
                (origin.empty() ? std::string("dataset") : origin.string()) +
                    ": top level must be a JSON array");
  }
  if (doc.empty()) {
    throw Error(ErrorKind::kEmptyDataset,
                (origin.empty() ? std::string("dataset") : origin.string()) +
                    ": zero entries");
  }

  DatasetFile file;
  file.format = format;
  file.path = origin;
  file.records.reserve(doc.size());

  std::unordered_map<std::string, std::size_t> seen;
  bool any_input_key = false;
  bool all_input_key = true;

  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    if (!entry.is_object()) {
      throw Error(ErrorKind::kMalformedFile,
                  entry_label(origin, i) + ": not a JSON object");
    }
    DatasetRecord record;
    record.instruction =
        std::string(trim(required_string(entry, "instruction", origin, i)));
    if (record.instruction.empty()) {
      throw Error(ErrorKind::kSchemaViolation,
                  entry_label(origin, i) + ": empty `instruction`");
    }
    record.response = required_string(entry, "output", origin, i);

    if (auto it = entry.find("input"); it != entry.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw Error(ErrorKind::kSchemaViolation,
                    entry_label(origin, i) + ": `input` is not a string");
      }
      record.input = std::string(trim(it->get<std::string>()));
      any_input_key = true;
    } else {
      all_input_key = false;
    }

    if (format == DatasetFormat::kRecycledJson) {
      if (auto it = entry.find("meta"); it != entry.end() && !it->is_null()) {
        if (!it->is_object()) {
          throw Error(ErrorKind::kSchemaViolation,
                      entry_label(origin, i) + ": `meta` is not an object");
        }
        for (const auto& [key, value] : it->items()) {
          if (!value.is_string()) {
            throw Error(ErrorKind::kSchemaViolation,
                        entry_label(origin, i) + ": meta `" + key +
                            "` is not a string");
          }
          record.meta.emplace(key, value.get<std::string>());
        }
      }
    }

    auto key = content_key(record.instruction, record.input, record.response);
    std::size_t occurrence = seen[key]++;
    record.id = sha256_hex(key + std::to_string(occurrence));
    file.records.push_back(std::move(record));
  }

  RecordSource source = RecordSource::kGeneric;
  if (format == DatasetFormat::kAlpacaJson) {
    if (all_input_key) {
      source = RecordSource::kAlpaca;
    } else if (!any_input_key) {
      source = RecordSource::kWizardLM;
    }
  }
  for (auto& record : file.records) record.source = source;
  return file;
}

DatasetFile load_dataset(const std::filesystem::path& path,
                         DatasetFormat format) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kIoFailure, "no such file: " + path.string());
  }
  return parse_dataset(read_file(path), format, path);
}

std::string serialize_dataset(const DatasetFile& file) {
  ordered_json doc = ordered_json::array();
  for (const auto& record : file.records) {
    ordered_json entry;
    entry["instruction"] = record.instruction;
    entry["input"] = record.input;
    entry["output"] = record.response;
    if (file.format == DatasetFormat::kRecycledJson && !record.meta.empty()) {
      ordered_json meta = ordered_json::object();
      for (const auto& [key, value] : record.meta) meta[key] = value;
      entry["meta"] = std::move(meta);
    }
    doc.push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

void write_dataset(const DatasetFile& file, const std::filesystem::path& path) {
  if (file.records.empty()) {
    throw Error(ErrorKind::kEmptyDataset,
                "refusing to write an empty dataset to " + path.string());
  }
  std::string text;
  try {
    text = serialize_dataset(file);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kIoFailure,
                "cannot serialize " + path.string() + ": " + e.what());
  }
  write_file_atomic(path, text);
}

std::string merged_instruction(const DatasetRecord& record) {
  if (record.input.empty()) return record.instruction;
  return record.instruction + "\n\n" + record.input;
}

std::size_t duplicate_count(const DatasetFile& file) {
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t duplicates = 0;
  for (const auto& record : file.records) {
    if (seen[content_key(record.instruction, record.input, record.response)]++ >
        0) {
      ++duplicates;
    }
  }
  return duplicates;
}

}  // namespace recycle
