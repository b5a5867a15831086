#include "ttfuse/simd.hpp"

namespace ttfuse::simd {
namespace {

void axpy(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add(std::size_t n, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void gemv_acc(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] += dot(cols, a + r * cols, x);
}

void gemv_t_acc(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy(cols, x[r], a + r * cols, y);
}

void ger_acc(std::size_t rows, std::size_t cols, const double* x, const double* y, double* a) {
    for (std::size_t r = 0; r < rows; ++r) axpy(cols, x[r], y, a + r * cols);
}

constexpr Kernels kScalar{Backend::Scalar, "scalar", axpy, add, dot, gemv_acc, gemv_t_acc, ger_acc};

}  // namespace

const Kernels& scalar_kernels() { return kScalar; }

}  // namespace ttfuse::simd
