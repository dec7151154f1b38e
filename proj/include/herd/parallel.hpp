#pragma once

#include <cstdint>
#include <functional>

namespace herd {

// Runs fn(i) for every i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Static block partition; results must be written to disjoint
// slots so the outcome is independent of scheduling. The first exception
// thrown by any worker is rethrown on the calling thread.
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace herd
