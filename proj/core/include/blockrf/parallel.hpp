#pragma once

#include <cstddef>
#include <functional>

namespace blockrf {

/// Resolves a requested worker count; 0 means hardware concurrency.
int resolve_workers(int requested);

/// Runs fn(i) for i in [0, n) on up to `workers` threads, handing out indices
/// dynamically. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace blockrf
