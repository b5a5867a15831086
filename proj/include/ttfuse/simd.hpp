#pragma once

// Inner-loop kernels used by the tensor train contraction, convolutions and
// dense layers. Each kernel has a scalar reference implementation and an
// AVX2 variant; the active table is chosen once at startup from CPUID and can
// be overridden with TTFUSE_SIMD=scalar|avx2.
//
// Elementwise kernels (axpy, gemv_t_acc, ger_acc, add) keep the per-element
// accumulation order of the scalar loop, so the AVX2 variants are bit-identical
// to the reference. Reductions (dot, gemv_acc) reassociate and agree only to
// rounding.

#include <cstddef>
#include <string_view>

namespace ttfuse::simd {

enum class Backend { Scalar, Avx2 };

struct Kernels {
    Backend backend;
    const char* name;

    // y[i] += a * x[i]
    void (*axpy)(std::size_t n, double a, const double* x, double* y);
    // y[i] += x[i]
    void (*add)(std::size_t n, const double* x, double* y);
    // sum_i x[i] * y[i]
    double (*dot)(std::size_t n, const double* x, const double* y);
    // y[r] += sum_c A[r, c] * x[c], A row-major rows x cols
    void (*gemv_acc)(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
    // y[c] += sum_r x[r] * A[r, c], accumulated in increasing r
    void (*gemv_t_acc)(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
    // A[r, c] += x[r] * y[c]
    void (*ger_acc)(std::size_t rows, std::size_t cols, const double* x, const double* y, double* a);
};

const Kernels& scalar_kernels();
// nullptr when the backend was not compiled in.
const Kernels* avx2_kernels();

bool cpu_supports(Backend b);
bool available(Backend b);

// Currently selected table. Thread-safe to read.
const Kernels& active();
// Throws std::invalid_argument if the backend is unavailable on this host.
void select(Backend b);

Backend parse_backend(std::string_view name);

}  // namespace ttfuse::simd
