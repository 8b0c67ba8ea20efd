#pragma once

#include <cstddef>
#include <functional>

namespace deepntk {

// Worker count: DEEPNTK_THREADS if set and positive, else hardware concurrency.
unsigned thread_count();

// Runs body(i) for i in [0, n) across worker threads. The first exception
// thrown by any task is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace deepntk
