#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace mvmc {

/// Global worker count used by parallel_for (0 = hardware concurrency).
/// Results are identical regardless of the value: each index writes only to
/// its own output slot.
void set_worker_count(int workers);
int worker_count();

/// Runs fn(i) for i in [0, n). Deterministic: static chunking, no shared
/// mutable state other than what fn itself touches.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  extern int worker_count_internal();
  int workers = worker_count_internal();
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mvmc
