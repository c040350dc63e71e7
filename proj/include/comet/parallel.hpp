#pragma once

#include "comet/types.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace comet {

/// Worker cap for row-parallel loops. Defaults to 1.
void set_thread_count(int n);
int thread_count();

/// Runs body(i) for i in [begin, end), split into contiguous chunks. Each
/// index is handled by exactly one worker, so per-index outputs do not
/// depend on the thread count.
template <typename Body>
void parallel_for(Index begin, Index end, Body&& body) {
  const Index n = end - begin;
  const Index workers = std::min<Index>(thread_count(), n);
  if (workers <= 1) {
    for (Index i = begin; i < end; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const Index chunk = (n + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index lo = begin + w * chunk;
    const Index hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (Index i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace comet
