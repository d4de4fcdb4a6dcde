#pragma once

// Static-partition parallel loop. Each worker owns a contiguous index range,
// so results written per index are identical for any thread count.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace tetzero {

/// TETZERO_THREADS if set and positive, else the hardware concurrency.
inline int thread_count() {
  if (const char* s = std::getenv("TETZERO_THREADS")) {
    const int n = std::atoi(s);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(begin, end) on disjoint ranges covering [0, n).
template <class F>
void parallel_for(std::size_t n, F&& fn, std::size_t min_chunk = 1024) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
  if (workers <= 1) {
    if (n) fn(std::size_t(0), n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t step = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * step, e = std::min(n, b + step);
    if (b >= e) break;
    pool.emplace_back([&, w, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace tetzero
