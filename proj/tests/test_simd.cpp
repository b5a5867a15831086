#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "support.hpp"
#include "ttfuse/simd.hpp"

using namespace ttfuse;

namespace {

const simd::Kernels* vector_kernels() {
    if (!simd::available(simd::Backend::Avx2)) return nullptr;
    return simd::avx2_kernels();
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
    return true;
}

}  // namespace

TEST_CASE("scalar kernels match plain loops") {
    const auto& k = simd::scalar_kernels();
    Rng rng(3);
    const std::size_t rows = 5, cols = 7;
    auto a = test::random_vector(rows * cols, rng);
    auto x = test::random_vector(cols, rng);
    auto xr = test::random_vector(rows, rng);

    std::vector<double> y(rows, 1.0), want(rows, 1.0);
    k.gemv_acc(rows, cols, a.data(), x.data(), y.data());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) want[r] += a[r * cols + c] * x[c];
    CHECK(test::max_abs_diff(y, want) < 1e-12);

    std::vector<double> yt(cols, 0.5), wt(cols, 0.5);
    k.gemv_t_acc(rows, cols, a.data(), xr.data(), yt.data());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) wt[c] += xr[r] * a[r * cols + c];
    CHECK(same_bits(yt, wt));

    std::vector<double> g(rows * cols, 0.25), wg(rows * cols, 0.25);
    k.ger_acc(rows, cols, xr.data(), x.data(), g.data());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) wg[r * cols + c] += xr[r] * x[c];
    CHECK(same_bits(g, wg));

    double d = 0;
    for (std::size_t c = 0; c < cols; ++c) d += x[c] * x[c];
    CHECK(k.dot(cols, x.data(), x.data()) == doctest::Approx(d).epsilon(1e-14));
}

TEST_CASE("vector kernels agree with the scalar reference") {
    const simd::Kernels* v = vector_kernels();
    if (!v) {
        MESSAGE("AVX2 unavailable on this host; equivalence not exercised");
        return;
    }
    const auto& s = simd::scalar_kernels();
    Rng rng(11);
    for (std::size_t n = 0; n <= 41; ++n) {
        CAPTURE(n);
        auto x = test::random_vector(n, rng);
        auto y0 = test::random_vector(n, rng);
        const double alpha = rng.normal();

        auto ys = y0, yv = y0;
        s.axpy(n, alpha, x.data(), ys.data());
        v->axpy(n, alpha, x.data(), yv.data());
        CHECK(same_bits(ys, yv));

        ys = y0;
        yv = y0;
        s.add(n, x.data(), ys.data());
        v->add(n, x.data(), yv.data());
        CHECK(same_bits(ys, yv));

        const double ds = s.dot(n, x.data(), y0.data()), dv = v->dot(n, x.data(), y0.data());
        double mag = 0;
        for (std::size_t i = 0; i < n; ++i) mag += std::abs(x[i] * y0[i]);
        CHECK(std::abs(ds - dv) <= 1e-14 * (mag + 1e-300) + 0.0);
    }
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t rows = 1 + rng.below(13), cols = 1 + rng.below(19);
        CAPTURE(rows);
        CAPTURE(cols);
        auto a = test::random_vector(rows * cols, rng);
        auto xc = test::random_vector(cols, rng);
        auto xr = test::random_vector(rows, rng);

        auto ys = test::random_vector(rows, rng);
        auto yv = ys;
        s.gemv_acc(rows, cols, a.data(), xc.data(), ys.data());
        v->gemv_acc(rows, cols, a.data(), xc.data(), yv.data());
        CHECK(test::max_abs_diff(ys, yv) < 1e-13);

        auto ts = test::random_vector(cols, rng);
        auto tv = ts;
        s.gemv_t_acc(rows, cols, a.data(), xr.data(), ts.data());
        v->gemv_t_acc(rows, cols, a.data(), xr.data(), tv.data());
        CHECK(same_bits(ts, tv));

        auto gs = a, gv = a;
        s.ger_acc(rows, cols, xr.data(), xc.data(), gs.data());
        v->ger_acc(rows, cols, xr.data(), xc.data(), gv.data());
        CHECK(same_bits(gs, gv));
    }
}

TEST_CASE("backend selection") {
    CHECK(simd::parse_backend("scalar") == simd::Backend::Scalar);
    CHECK(simd::parse_backend("avx2") == simd::Backend::Avx2);
    CHECK_THROWS_AS(simd::parse_backend("neon"), std::invalid_argument);
    CHECK(simd::available(simd::Backend::Scalar));

    const simd::Backend before = simd::active().backend;
    simd::select(simd::Backend::Scalar);
    CHECK(simd::active().backend == simd::Backend::Scalar);
    if (simd::available(simd::Backend::Avx2)) {
        simd::select(simd::Backend::Avx2);
        CHECK(simd::active().backend == simd::Backend::Avx2);
    } else {
        CHECK_THROWS_AS(simd::select(simd::Backend::Avx2), std::invalid_argument);
    }
    simd::select(before);
}
