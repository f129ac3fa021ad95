#pragma once

// Deterministic work queue: tasks are indexed, workers share nothing mutable,
// and results land in a vector slot chosen by task index, so output is
// independent of scheduling and worker count.

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace covertime::harness {

template <class T, class Fn>
std::vector<T> run_indexed(std::int64_t n_tasks, int workers, Fn&& fn) {
  std::vector<T> results(static_cast<std::size_t>(n_tasks));
  if (n_tasks == 0) return results;
  if (workers <= 1 || n_tasks == 1) {
    for (std::int64_t i = 0; i < n_tasks; ++i) {
      results[static_cast<std::size_t>(i)] = fn(i);
    }
    return results;
  }

  std::atomic<std::int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n_tasks || failed.load(std::memory_order_relaxed)) return;
      try {
        results[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  const int n_threads = static_cast<int>(
      std::min<std::int64_t>(workers, n_tasks));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace covertime::harness
