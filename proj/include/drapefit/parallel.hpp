#pragma once

#include <functional>

namespace drapefit {

// Process-wide worker count for element loops and the finite-difference
// evaluations. 1 disables threading.
void set_thread_count(int n);
int thread_count();

// Chunked parallel map over [0, n). Each index is visited exactly once and
// writes only its own slot, so results are identical for any thread count;
// reductions over the produced slots are done serially by the caller in
// index order.
void parallel_for(long n, const std::function<void(long)>& body);

} // namespace drapefit
