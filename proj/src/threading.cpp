// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "enerf/threading.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace enerf {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(std::int64_t n, int threads,
                     const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min<std::int64_t>(threads, n));
  if (workers == 1) {
    fn(0, 0, n);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const std::int64_t begin = std::min<std::int64_t>(w * chunk, n);
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
    pool.emplace_back([&, w, begin, end] {
      try {
        if (begin < end) fn(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace enerf
