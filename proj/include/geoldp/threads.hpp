#pragma once

#include <cstddef>
#include <functional>

namespace geoldp {

// Worker cap: GEOLDP_THREADS when set (>= 1), hardware concurrency otherwise.
int thread_budget();

// Static block partition of [0, count) across the budget; fn(i) must only
// touch slot i so the result is independent of the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace geoldp
