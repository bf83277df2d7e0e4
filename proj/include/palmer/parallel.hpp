#pragma once

#include <cstddef>
#include <functional>

namespace palmer {

// Worker count: PALMER_THREADS caps it, hardware concurrency is the default.
unsigned worker_count(std::size_t jobs);

// Index-sharded parallel loop. Each index is processed exactly once and
// writes only to its own slot, so results do not depend on the thread count.
// The first exception (if any) is rethrown on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace palmer
