#pragma once

#include <cstddef>
#include <functional>
#include <thread>

namespace elves {

inline unsigned default_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n ? n : 1;
}

// Runs fn(i) for i in [0, count) on up to `workers` threads pulling from a
// shared counter. Callers that care about order write results by index, so
// output is deterministic regardless of worker count. The first exception is
// rethrown on the calling thread after all workers drain.
void parallel_for(size_t count, unsigned workers, const std::function<void(size_t)>& fn);

}  // namespace elves
