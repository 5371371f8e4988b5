#pragma once

#include <cstddef>
#include <functional>

namespace mog {

// Worker cap: MOG_THREADS if set to a positive integer, else the hardware
// concurrency (at least 1).
std::size_t worker_count();

// Runs fn(0..n-1) on up to worker_count() threads. If any call throws, the
// exception from the lowest failing index is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mog
