#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace nlos {

/// Splits [0, n) into `workers` contiguous chunks and runs
/// fn(worker, begin, end) on each. Chunk boundaries depend only on n and the
/// worker count, so per-worker results are reproducible. The first exception
/// thrown by any worker is rethrown on the calling thread.
template <class Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n));
  auto bounds = [&](std::size_t i) { return n * i / w; };
  if (w == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  {
    std::vector<std::jthread> pool;
    pool.reserve(w - 1);
    for (std::size_t i = 1; i < w; ++i) {
      pool.emplace_back([&, i] {
        try {
          fn(i, bounds(i), bounds(i + 1));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    try {
      fn(std::size_t{0}, bounds(0), bounds(1));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Number of chunks parallel_chunks will use.
inline std::size_t chunk_count(std::size_t n, int workers) {
  return std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n));
}

}  // namespace nlos
