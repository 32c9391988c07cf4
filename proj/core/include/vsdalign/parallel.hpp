#pragma once

#include <cstddef>
#include <functional>

namespace vsdalign {

/// Worker count used by row-parallel kernels. Reads VSDALIGN_THREADS once;
/// defaults to the hardware concurrency.
std::size_t thread_count();

/// Overrides the worker count for the rest of the process (0 restores the default).
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n) split into contiguous static chunks.
/// Each index is handled by exactly one worker, so as long as body(i) only
/// writes slot i, results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace vsdalign
