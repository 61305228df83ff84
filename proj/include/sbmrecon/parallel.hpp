#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sbm {

/// 0 means all hardware threads.
inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs body(i) for i in [0, count). Work is handed out in fixed-size chunks;
/// results must be written to per-index slots so the outcome does not depend
/// on the thread count. The first exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body,
                  std::size_t chunk = 256) {
  threads = resolve_threads(threads);
  if (threads <= 1 || count <= chunk) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      std::size_t begin;
      {
        std::lock_guard lock(mu);
        if (next >= count || error) return;
        begin = next;
        next = std::min(count, next + chunk);
      }
      const std::size_t end = std::min(count, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::min<std::size_t>(threads, (count + chunk - 1) / chunk);
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sbm
