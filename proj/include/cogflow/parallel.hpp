#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cogflow {

/// Chunked parallel loop over [0, n). Chunk boundaries depend only on n and
/// workers, and each index must be touched by exactly one worker, so results
/// stay worker-count independent as long as per-index work is isolated.
/// The first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
inline void parallel_for(size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n < 2) {
    fn(static_cast<size_t>(0), n, 0);
    return;
  }
  const size_t w = std::min<size_t>(static_cast<size_t>(workers), n);
  const size_t chunk = (n + w - 1) / w;
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  threads.reserve(w);
  for (size_t i = 0; i < w; ++i) {
    const size_t begin = i * chunk;
    const size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&fn, &errors, begin, end, i] {
      try {
        fn(begin, end, static_cast<int>(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace cogflow
