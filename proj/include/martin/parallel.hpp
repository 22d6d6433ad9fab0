#pragma once

#include <cstddef>
#include <functional>

namespace martin {

/// Worker count: hardware concurrency, capped by MARTIN_RECOVER_THREADS
/// when set to a positive integer.
int worker_count();

/// Fixes the worker count for the whole process (0 restores the default).
void set_worker_count(int n);

/// Runs body(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. Callers write results by index, so the outcome does not depend on
/// the number of workers. The first exception thrown by a chunk is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  int workers = 0);

}  // namespace martin
