// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <functional>

namespace oadt {

// Worker count from OADT_THREADS (default 1). Read once per process.
std::size_t thread_count();

// Override for tests and bindings. Zero restores the environment value.
void set_thread_count(std::size_t n);

// Runs fn(begin, end) over a static partition of [0, n). Each index is
// visited by exactly one worker, so results are independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace oadt
