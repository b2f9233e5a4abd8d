#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace c2v {

/// Worker count: C2V_THREADS if set (>= 1), otherwise hardware concurrency.
int worker_count();

/// Overrides the worker count for the current process (0 restores the default).
void set_worker_count(int n);

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks never overlap,
/// so per-index writes are independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_chunk = 256);

/// Pairwise summation; result depends only on the input order.
double pairwise_sum(std::span<const double> values);
double pairwise_sum(std::span<const float> values);

}  // namespace c2v
