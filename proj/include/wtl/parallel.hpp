#pragma once

// Static-partition parallel loop. Each index is processed exactly once and
// results go to caller-owned slots, so output never depends on scheduling.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace wtl {

/// Worker count for a request of `threads` (0 = hardware concurrency).
inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

template <typename F>
void parallel_for(std::size_t n, int threads, F&& body) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(resolve_threads(threads)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * n / workers; i < (t + 1) * n / workers; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace wtl
