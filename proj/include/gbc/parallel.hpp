#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gbc {

/// Runs fn(i) for i in [begin, end) on up to `threads` worker threads using
/// contiguous chunks. Each index must only touch its own output slot; the
/// first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, int threads, Fn&& fn) {
  const std::ptrdiff_t count = end - begin;
  if (count <= 0) return;
  const auto workers = static_cast<std::ptrdiff_t>(std::clamp<std::ptrdiff_t>(threads, 1, count));
  if (workers == 1) {
    for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::ptrdiff_t chunk = (count + workers - 1) / workers;
  for (std::ptrdiff_t w = 0; w < workers; ++w) {
    const std::ptrdiff_t lo = begin + w * chunk;
    const std::ptrdiff_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::ptrdiff_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace gbc
