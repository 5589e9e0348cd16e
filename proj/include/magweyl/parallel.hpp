#pragma once

#include <cstddef>
#include <functional>

namespace magweyl {

// Environment variable selecting the worker count.
inline constexpr const char* kThreadsEnv = "MAGWEYL_THREADS";

/// Worker count: MAGWEYL_THREADS if set to a positive integer, otherwise
/// std::thread::hardware_concurrency() (at least 1).
int worker_count();

/// Calls body(i) for i in [0, n) on up to `workers` threads (0 = worker_count()).
/// Indices are split into contiguous blocks, so which thread runs which index is
/// deterministic. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int workers = 0);

}  // namespace magweyl
