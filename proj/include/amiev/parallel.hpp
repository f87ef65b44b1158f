#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace amiev {

/// Splits [0, n) into `workers` contiguous chunks and runs
/// `fn(begin, end, chunk_index)` on each, one thread per chunk. Chunk
/// boundaries depend only on n and the worker count; callers that need
/// results independent of the worker count must reduce per-item results in
/// index order. The first exception thrown by any chunk is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::clamp<std::size_t>(workers < 1 ? 1 : static_cast<std::size_t>(workers), 1,
                                                std::max<std::size_t>(n, 1));
  if (w == 1) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t c = 0; c < w; ++c) {
    const std::size_t begin = n * c / w;
    const std::size_t end = n * (c + 1) / w;
    pool.emplace_back([&, begin, end, c] {
      try {
        fn(begin, end, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace amiev
