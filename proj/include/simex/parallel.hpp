#pragma once

#include <cstddef>
#include <functional>

namespace simex {

/// Worker cap from SIMEX_NUM_THREADS, else hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(0..count-1) on up to worker_count() threads. Calls nested inside
/// another parallel_for run serially. The first exception thrown is rethrown
/// after all workers have stopped.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace simex
