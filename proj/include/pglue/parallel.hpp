// Deterministic chunked parallelism.
//
// Work is split into chunks whose boundaries depend only on the problem
// size, never on the worker count. Each chunk writes to its own slot, and
// callers reduce slots in chunk-index order, so results are bit-identical
// for any number of workers.

#ifndef PGLUE_PARALLEL_HPP
#define PGLUE_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace pglue {

/// Runs fn(chunk_index) for chunk_index in [0, chunk_count) on up to
/// `workers` threads. fn must only touch state owned by its chunk.
/// Exceptions thrown by fn are rethrown on the calling thread.
void parallel_chunks(std::size_t chunk_count, int workers, const std::function<void(std::size_t)>& fn);

/// Number of fixed-size chunks covering n items.
inline std::size_t chunk_count_for(std::size_t n, std::size_t chunk_size) {
  return n == 0 ? 0 : (n + chunk_size - 1) / chunk_size;
}

}  // namespace pglue

#endif  // PGLUE_PARALLEL_HPP
