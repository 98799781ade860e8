#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace fudnn {

// Worker count: explicit request, else FUDNN_THREADS, else 1.
std::size_t resolve_threads(std::optional<int> requested = std::nullopt);

// Runs fn(0..n-1) on up to `threads` workers. Each index runs exactly once;
// if any throw, the exception of the lowest failing index is rethrown after
// all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

} // namespace fudnn
