#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ttfuse/simd.hpp"

namespace ttfuse::simd {

#if defined(TTFUSE_HAVE_AVX2)
const Kernels* avx2_kernels_impl();
#endif

const Kernels* avx2_kernels() {
#if defined(TTFUSE_HAVE_AVX2)
    return avx2_kernels_impl();
#else
    return nullptr;
#endif
}

bool cpu_supports(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

bool available(Backend b) {
    if (b == Backend::Avx2 && avx2_kernels() == nullptr) return false;
    return cpu_supports(b);
}

Backend parse_backend(std::string_view name) {
    if (name == "scalar") return Backend::Scalar;
    if (name == "avx2") return Backend::Avx2;
    throw std::invalid_argument("unknown SIMD backend '" + std::string(name) + "'");
}

namespace {

const Kernels* table_for(Backend b) {
    return b == Backend::Avx2 ? avx2_kernels() : &scalar_kernels();
}

const Kernels* initial_table() {
    if (const char* env = std::getenv("TTFUSE_SIMD"); env != nullptr && *env != '\0') {
        const Backend b = parse_backend(env);
        if (!available(b)) throw std::invalid_argument(std::string("TTFUSE_SIMD=") + env + " not available on this host");
        return table_for(b);
    }
    if (available(Backend::Avx2)) return avx2_kernels();
    return &scalar_kernels();
}

std::atomic<const Kernels*>& slot() {
    static std::atomic<const Kernels*> current{initial_table()};
    return current;
}

}  // namespace

const Kernels& active() { return *slot().load(std::memory_order_acquire); }

void select(Backend b) {
    if (!available(b)) throw std::invalid_argument("SIMD backend not available on this host");
    slot().store(table_for(b), std::memory_order_release);
}

}  // namespace ttfuse::simd
