#pragma once

#include <cstddef>
#include <functional>

namespace fpo {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is split into
// contiguous blocks; callers write results into per-index slots and reduce
// afterwards so results do not depend on `jobs`.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace fpo
