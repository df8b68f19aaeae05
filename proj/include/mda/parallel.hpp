#pragma once

#include <cstddef>
#include <functional>

namespace mda {

/// Worker count used by data-parallel loops; 0 selects hardware concurrency.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on contiguous chunks (serially when called
/// from inside another parallel_for). Each index is visited
/// exactly once, so writes to per-index slots stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mda
