// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace oadt {
namespace {

std::size_t env_thread_count() {
  static const std::size_t value = [] {
    const char* raw = std::getenv("OADT_THREADS");
    if (raw == nullptr) return std::size_t{1};
    try {
      const long n = std::stol(raw);
      return n > 0 ? static_cast<std::size_t>(n) : std::size_t{1};
    } catch (...) {
      return std::size_t{1};
    }
  }();
  return value;
}

std::atomic<std::size_t> g_override{0};

// Below this many items the thread start-up cost dominates.
constexpr std::size_t kMinItemsPerWorker = 16;

}  // namespace

std::size_t thread_count() {
  const std::size_t o = g_override.load(std::memory_order_relaxed);
  return o != 0 ? o : env_thread_count();
}

void set_thread_count(std::size_t n) { g_override.store(n, std::memory_order_relaxed); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_count(), n / kMinItemsPerWorker);
  if (workers <= 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back(fn, begin, end);
  }
  fn(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace oadt
