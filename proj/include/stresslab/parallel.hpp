#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace stresslab {

/// Worker count: STRESSLAB_THREADS when set and positive, else the hardware
/// concurrency (at least 1).
unsigned worker_count();

/// Runs fn(0..count-1) on up to `threads` workers. The first exception
/// thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace stresslab
