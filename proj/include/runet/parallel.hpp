#pragma once

#include <cstddef>
#include <functional>

namespace runet {

// Number of workers used by parallel_for. Defaults to RUNET_THREADS when set,
// otherwise std::thread::hardware_concurrency().
std::size_t worker_count();

// Overrides the worker count for the current process (0 restores the default).
void set_worker_count(std::size_t workers);

// Runs fn(i) for every i in [0, n). Indices are split into contiguous ranges,
// one per worker; every index is processed by exactly one worker, so callers
// that write only to index-owned outputs get results independent of the
// worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace runet
