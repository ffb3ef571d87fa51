#pragma once

#include <cstddef>
#include <functional>

namespace pixie {

// Worker count used by parallel_for. Defaults to PIXIE_THREADS when set,
// else 1.
int thread_count();
void set_thread_count(int threads);

// Runs fn(i) for i in [0, count). Each index is executed exactly once; callers
// write into per-index slots and reduce afterwards in index order, which keeps
// results independent of the thread count. The first exception thrown by any
// task is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace pixie
