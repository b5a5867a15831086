// Compiled with -mavx2 only. FMA is deliberately not enabled so that
// mul-then-add matches the scalar reference bit for bit.

#include <immintrin.h>

#include "ttfuse/simd.hpp"

namespace ttfuse::simd {
namespace {

void axpy(std::size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        __m256d y1 = _mm256_loadu_pd(y + i + 4);
        y0 = _mm256_add_pd(y0, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
        y1 = _mm256_add_pd(y1, _mm256_mul_pd(va, _mm256_loadu_pd(x + i + 4)));
        _mm256_storeu_pd(y + i, y0);
        _mm256_storeu_pd(y + i + 4, y1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        y0 = _mm256_add_pd(y0, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
        _mm256_storeu_pd(y + i, y0);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add(std::size_t n, const double* x, double* y) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sw = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sw));
}

double dot(std::size_t n, const double* x, const double* y) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_add_pd(s0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        s1 = _mm256_add_pd(s1, _mm256_mul_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        s0 = _mm256_add_pd(s0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void gemv_acc(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] += dot(cols, a + r * cols, x);
}

// Column blocks are held in registers across the whole r loop; each lane still
// sees y[c] + x[0]*A[0,c] + x[1]*A[1,c] + ... in order.
void gemv_t_acc(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    std::size_t c = 0;
    for (; c + 8 <= cols; c += 8) {
        __m256d y0 = _mm256_loadu_pd(y + c);
        __m256d y1 = _mm256_loadu_pd(y + c + 4);
        for (std::size_t r = 0; r < rows; ++r) {
            const __m256d xr = _mm256_set1_pd(x[r]);
            const double* row = a + r * cols + c;
            y0 = _mm256_add_pd(y0, _mm256_mul_pd(xr, _mm256_loadu_pd(row)));
            y1 = _mm256_add_pd(y1, _mm256_mul_pd(xr, _mm256_loadu_pd(row + 4)));
        }
        _mm256_storeu_pd(y + c, y0);
        _mm256_storeu_pd(y + c + 4, y1);
    }
    for (; c + 4 <= cols; c += 4) {
        __m256d y0 = _mm256_loadu_pd(y + c);
        for (std::size_t r = 0; r < rows; ++r)
            y0 = _mm256_add_pd(y0, _mm256_mul_pd(_mm256_set1_pd(x[r]), _mm256_loadu_pd(a + r * cols + c)));
        _mm256_storeu_pd(y + c, y0);
    }
    for (; c < cols; ++c) {
        double acc = y[c];
        for (std::size_t r = 0; r < rows; ++r) acc += x[r] * a[r * cols + c];
        y[c] = acc;
    }
}

void ger_acc(std::size_t rows, std::size_t cols, const double* x, const double* y, double* a) {
    for (std::size_t r = 0; r < rows; ++r) axpy(cols, x[r], y, a + r * cols);
}

constexpr Kernels kAvx2{Backend::Avx2, "avx2", axpy, add, dot, gemv_acc, gemv_t_acc, ger_acc};

}  // namespace

const Kernels* avx2_kernels_impl() { return &kAvx2; }

}  // namespace ttfuse::simd
