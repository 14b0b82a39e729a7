#pragma once

#include <cstddef>
#include <functional>

namespace predsens {

// Worker count resolution: explicit request > PREDSENS_THREADS environment
// variable > hardware concurrency (capped at 16).
int resolve_threads(int requested);

// Runs fn(i) for i in [0, n) across `threads` workers. Results must be
// written to disjoint slots; the partitioning is static so there is no
// scheduling nondeterminism to worry about.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace predsens
