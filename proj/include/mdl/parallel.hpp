#pragma once

#include <cstddef>
#include <functional>

namespace mdl {

// Number of worker threads the global pool runs with. Honors the MDL_THREADS
// environment variable (values < 1 fall back to hardware concurrency).
std::size_t thread_count();

// Static range split over the pool: fn(begin, end) on disjoint chunks.
// Each output element is owned by exactly one chunk, so results do not
// depend on the number of threads. Re-entrant calls run inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace mdl
