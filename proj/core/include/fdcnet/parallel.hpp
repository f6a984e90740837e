#pragma once

#include <cstddef>
#include <functional>

namespace fdcnet {

// Worker count: FDCNET_THREADS if set to a positive integer, else the
// hardware concurrency (at least 1).
std::size_t thread_budget();

// Runs fn(i) for i in [0, n). Each index is handled by exactly one thread, so
// callers that write only to slot i get results independent of the thread
// count. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fdcnet
