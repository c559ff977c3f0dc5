#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace relaynet {

// Hardware concurrency, never zero.
inline unsigned default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Runs task(i) for i in [0, n_tasks) on at most `workers` threads. Tasks are
// handed out dynamically; callers write results into per-index slots so the
// reduction order never depends on scheduling. The first exception thrown by
// any task is rethrown after all threads have joined.
template <class Task>
void parallel_for(std::size_t n_tasks, unsigned workers, Task&& task) {
  if (n_tasks == 0) return;
  const std::size_t n_threads =
      std::min<std::size_t>(n_tasks, std::max<unsigned>(1, workers == 0 ? default_workers() : workers));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_tasks) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_tasks;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads - 1);
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace relaynet
