#include "mvmc/parallel.hpp"

#include <atomic>

namespace mvmc {

namespace {
std::atomic<int> g_workers{0};
}

void set_worker_count(int workers) { g_workers.store(workers < 0 ? 0 : workers); }

int worker_count() {
  int w = g_workers.load();
  if (w == 0) w = static_cast<int>(std::thread::hardware_concurrency());
  return w > 0 ? w : 1;
}

int worker_count_internal() { return worker_count(); }

}  // namespace mvmc
