#pragma once

#include <cstddef>
#include <functional>

namespace masklab {

// Global worker cap (CLI --threads). 0 means "use hardware concurrency".
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; callers
// write results into per-index slots, so the merged output does not depend on
// the thread count. Exceptions are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace masklab
