#include "ttfuse/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ttfuse {
namespace {

constexpr std::size_t kMaxChunks = 8;

std::size_t initial_workers() {
    if (const char* env = std::getenv("TTFUSE_THREADS"); env != nullptr && *env != '\0') {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

std::atomic<std::size_t>& workers() {
    static std::atomic<std::size_t> w{initial_workers()};
    return w;
}

}  // namespace

std::size_t worker_count() { return workers().load(); }
void set_worker_count(std::size_t n) { workers().store(std::max<std::size_t>(1, n)); }

std::size_t chunk_count(std::size_t n) { return std::min(n, kMaxChunks); }

std::size_t chunk_begin(std::size_t n, std::size_t chunk) {
    const std::size_t c = chunk_count(n);
    return c == 0 ? 0 : n * chunk / c;
}

void for_each_chunk(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t chunks = chunk_count(n);
    const std::size_t threads = std::min(worker_count(), chunks);
    if (threads <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) fn(c, chunk_begin(n, c), chunk_begin(n, c + 1));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            try {
                fn(c, chunk_begin(n, c), chunk_begin(n, c + 1));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace ttfuse
