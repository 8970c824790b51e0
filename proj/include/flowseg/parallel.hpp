#pragma once

#include <functional>

namespace flowseg {

// Worker cap: FLOWSEG_THREADS if set and positive, otherwise (0 or unset)
// the hardware concurrency.
int worker_count();

// Runs body(0..n-1) across up to worker_count() threads. Bodies must write
// only to their own slot; the call rethrows the first body exception.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace flowseg
