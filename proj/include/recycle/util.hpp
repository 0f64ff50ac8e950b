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

#include <filesystem>
#include <string>
#include <string_view>

namespace recycle {

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// Strips ASCII whitespace from both ends.
std::string_view trim(std::string_view text) noexcept;

// Whole-file read. Throws Error{kIoFailure}.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file then renames over `path`, so readers see
// either the old content or the new content, never a partial file.
// Throws Error{kIoFailure}.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

}  // namespace recycle
