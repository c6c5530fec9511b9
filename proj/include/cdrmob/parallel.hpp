#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cdrmob {

inline unsigned default_threads() noexcept {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Runs body(begin, end) over `threads` contiguous slices of [0, n). Slices are
// disjoint, so writes indexed by position need no locking. The first exception
// thrown by any worker is rethrown on the caller.
template <typename Body>
void parallel_ranges(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  parallel_ranges(n, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) body(k);
  });
}

// Splits [0, n) into fixed-size blocks (independent of the thread count) and
// runs body(block, begin, end) for each. Reducing per-block partials in block
// order gives results that are bit-identical for any number of threads.
template <typename Body>
std::size_t parallel_blocks(std::size_t n, std::size_t block, unsigned threads, Body&& body) {
  const std::size_t blocks = (n + block - 1) / block;
  parallel_for(blocks, threads, [&](std::size_t b) {
    body(b, b * block, std::min(n, (b + 1) * block));
  });
  return blocks;
}

}  // namespace cdrmob
