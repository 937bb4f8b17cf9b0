#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace pore {

/// Worker count: explicit request, else $PORE_THREADS, else hardware.
inline unsigned resolve_threads(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PORE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(task, worker) for task in [0, n_tasks) on up to `threads`
/// workers. Tasks are handed out dynamically; the first exception thrown by
/// any task is rethrown on the calling thread after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n_tasks, unsigned threads, Fn&& fn) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n_tasks));
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t, 0u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (;;) {
        const std::size_t t = next.fetch_add(1, std::memory_order_relaxed);
        if (t >= n_tasks || failed.load(std::memory_order_relaxed)) return;
        try {
          fn(t, w);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Number of workers parallel_for will actually use.
inline unsigned worker_count(std::size_t n_tasks, unsigned threads) {
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(threads, n_tasks)));
}

}  // namespace pore
