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

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace recycle {

// Calls task(i) for every i in [0, n) on up to `workers` threads. Indices are
// handed out in increasing order. Once `stop` is set, or a task throws, no new
// index is started; in-flight tasks finish. The first exception is rethrown
// after all threads have joined.
//
// Returns true iff every index ran.
template <typename Task>
bool parallel_for(std::size_t n, int workers, Task&& task,
                  const std::atomic<bool>* stop = nullptr) {
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> finished{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (true) {
      if (failed.load() || (stop != nullptr && stop->load())) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        task(i);
        finished.fetch_add(1);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const auto count = static_cast<std::size_t>(std::max(1, workers));
  if (count == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(std::min(count, n));
    for (std::size_t t = 0; t < std::min(count, n); ++t) {
      threads.emplace_back(worker);
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return finished.load() == n;
}

}  // namespace recycle
