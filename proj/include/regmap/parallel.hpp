#pragma once

#include <cstddef>
#include <functional>

namespace regmap {

/// REGMAP_THREADS when set and positive, else the hardware concurrency.
int default_threads();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must
/// not throw; results are merged by the caller in index order.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace regmap
