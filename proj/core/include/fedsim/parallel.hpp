#pragma once

#include <functional>

namespace fedsim {

/// Runs body(0..n-1) on up to `threads` workers and joins. Falls back to a
/// plain loop for threads <= 1. Tasks must not share mutable state; the
/// first exception thrown by any task is rethrown on the calling thread.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

} // namespace fedsim
