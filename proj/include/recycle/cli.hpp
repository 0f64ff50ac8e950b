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
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "recycle/http_backends.hpp"

namespace recycle::cli {

// Process seams, replaceable in tests.
struct Environment {
  // Environment variable lookup; nullopt when unset.
  std::function<std::optional<std::string>(const std::string&)> getenv;
  // The only way the CLI opens network connections.
  std::function<std::unique_ptr<oracle::HttpTransport>(const std::string&)>
      make_transport;
  // Raised by the SIGINT handler; workers stop picking up new records.
  const std::atomic<bool>* stop = nullptr;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  static Environment process();
};

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInterrupted = 130;

// Entry point behind the `recycle` binary: subcommands recycle, report, judge
// and validate. Never throws; failures become a nonzero exit status plus a
// one-line JSON error report on stderr (and error.json in the output
// directory when one was given).
int run(const std::vector<std::string>& args, Environment& env);

}  // namespace recycle::cli
