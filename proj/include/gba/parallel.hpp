#pragma once

#include <cstddef>
#include <functional>

namespace gba {

/// Worker count used by parallel_for. Defaults to $GBA_THREADS when set,
/// otherwise std::thread::hardware_concurrency().
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n) over static contiguous chunks. Callers write
/// into pre-sized slots indexed by i, so results never depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace gba
