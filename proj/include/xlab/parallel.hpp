#pragma once

#include <cstddef>
#include <functional>

namespace xlab {

// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Indices are handed out in contiguous blocks, so callers that
// write results into slot i get schedule-independent output. The first
// exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

unsigned resolve_threads(unsigned requested);

}  // namespace xlab
