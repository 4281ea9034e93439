// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>

namespace enerf {

/// Resolves a user-facing thread count: values <= 0 mean "hardware".
int resolve_threads(int requested);

/// Runs fn(worker, begin, end) over [0, n) split into `threads` contiguous
/// chunks. The chunk boundaries depend only on (n, threads), so any
/// per-worker results can be merged in worker order for a fixed reduction
/// order. With threads == 1 the call runs inline on the caller's thread.
void parallel_chunks(std::int64_t n, int threads,
                     const std::function<void(int, std::int64_t, std::int64_t)>& fn);

}  // namespace enerf
