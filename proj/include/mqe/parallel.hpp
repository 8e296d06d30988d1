#pragma once

#include <cstddef>
#include <functional>

namespace mqe {

// Global cap on worker threads used inside library operations (1 = run inline).
void set_max_threads(std::size_t threads);
std::size_t max_threads() noexcept;

// Splits [begin, end) into at most max_threads() contiguous chunks and runs
// `body(chunk_begin, chunk_end)` on each. Chunks never share output rows in the
// library's callers, so results do not depend on the thread count. Ranges
// smaller than `min_chunk` per thread run inline.
void parallel_for(std::size_t begin, std::size_t end, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mqe
