#pragma once

#include <cstddef>
#include <functional>

namespace icnn {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Indices are handed out in
/// order; the first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace icnn
