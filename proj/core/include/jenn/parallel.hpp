#pragma once

#include <cstddef>
#include <functional>

namespace jenn {

/// Upper bound on worker threads used by batch evaluations. 0 means hardware
/// concurrency. Results never depend on this value.
void set_max_threads(unsigned count);
unsigned max_threads();

/// Runs `task(i)` for every i in [0, count). Tasks may run concurrently; each
/// index runs exactly once. Callers reduce per-index results in index order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task);

} // namespace jenn
