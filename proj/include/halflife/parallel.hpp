#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace halflife {

/// Runs fn(i) for i in [0, n) on at most `jobs` threads. Each index is
/// visited exactly once; fn must only write to per-index state.
template <class Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
  const size_t workers = std::min<size_t>(n, static_cast<size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace halflife
