#pragma once

#include <cstddef>
#include <functional>

namespace ttfuse {

// Worker cap from TTFUSE_THREADS (default 1). Read once.
std::size_t worker_count();
void set_worker_count(std::size_t n);

// Work over [0, n) is cut into a chunk count that depends only on n, never on
// the number of workers, so per-chunk partial results reduced in chunk order
// are identical for any thread count.
std::size_t chunk_count(std::size_t n);
std::size_t chunk_begin(std::size_t n, std::size_t chunk);

// fn(chunk, begin, end) runs once per chunk, possibly concurrently.
void for_each_chunk(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace ttfuse
