#pragma once

// Minimal deterministic fan-out: run fn(0..n-1) on a bounded pool. Each
// index owns its output slot, so results never depend on scheduling. A
// worker rethrows the first exception it sees after the pool drains.

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rvf {

inline int resolve_jobs(int requested, int n_tasks) {
  int jobs = requested > 0 ? requested
                           : static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  if (jobs > n_tasks) jobs = n_tasks;
  return jobs;
}

inline void parallel_for(int n, int n_jobs,
                         const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int jobs = resolve_jobs(n_jobs, n);
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_lock;
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int worker = 0; worker < jobs; ++worker) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = cursor.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> hold(error_lock);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rvf
