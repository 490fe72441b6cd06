#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace ntl {

// Global worker budget for within-op data parallelism. Work is split by
// output element with no cross-thread reductions, so results are identical
// for any thread count.
inline int& thread_budget_ref() {
  static int budget = std::max(1u, std::thread::hardware_concurrency());
  return budget;
}
inline int thread_budget() { return thread_budget_ref(); }
inline void set_thread_budget(int n) { thread_budget_ref() = n < 1 ? 1 : n; }

// Runs fn(begin, end) over [0, n) in contiguous chunks. Falls back to a
// plain call when the budget is 1 or the range is small.
template <class Fn>
void parallel_for(std::size_t n, std::size_t min_chunk, Fn&& fn) {
  const int budget = thread_budget();
  if (budget <= 1 || n < 2 * min_chunk) {
    if (n) fn(std::size_t(0), n);
    return;
  }
  const std::size_t workers =
      std::min<std::size_t>(std::size_t(budget), std::max<std::size_t>(1, n / min_chunk));
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ntl
