#pragma once

#include <cstddef>
#include <functional>

namespace s2p2 {

/// Worker count used by data-parallel loops. Defaults to S2P2_THREADS when set,
/// otherwise std::thread::hardware_concurrency().
int thread_count();
void set_thread_count(int threads);

/// Splits [0, n) into `threads` contiguous blocks and calls fn(begin, end)
/// for each block. Block boundaries depend only on (n, threads).
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  parallel_for(n, thread_count(), fn);
}

}  // namespace s2p2
