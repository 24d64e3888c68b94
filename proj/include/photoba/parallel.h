#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace photoba {

// Default worker count: PHOTOBA_THREADS if set, otherwise 1.
int DefaultThreadCount();

// Runs fn(task) for task in [0, num_tasks) on up to `threads` workers.
// Task-to-worker assignment is dynamic, so callers that need determinism
// must write per-task results and reduce them in task order afterwards.
// The first exception thrown by any task is rethrown on the caller.
template <typename Fn>
void ParallelFor(std::size_t num_tasks, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(threads, 1), num_tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < num_tasks; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= num_tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(num_tasks);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace photoba
