#pragma once

#include <cstddef>
#include <functional>

namespace flattrack {

/// Worker count: hardware concurrency capped by FLATTRACK_THREADS when set.
unsigned worker_count();

/// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; fn
/// must only touch state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace flattrack
