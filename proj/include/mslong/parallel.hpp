#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mslong {

// Runs fn(0..n_tasks) across `jobs` threads. Tasks must be pure functions of
// their index (plus derived seeds), so results do not depend on scheduling;
// jobs only changes wall time. The lowest-index exception is rethrown.
inline void parallel_for(size_t n_tasks, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs < 1) jobs = 1;
  if (jobs == 1 || n_tasks <= 1) {
    for (size_t i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(n_tasks);
  std::vector<std::thread> workers;
  const int n_workers = static_cast<int>(std::min<size_t>(jobs, n_tasks));
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mslong
