#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace flsplan {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Callers write
/// results into per-index slots, so output never depends on scheduling.
/// The first exception thrown by any task is rethrown.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  if (count == 0) return;
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), count);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next.store(count);
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace flsplan
