#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <cstring>
#include <set>
#include <stdexcept>

#include "support.hpp"
#include "ttfuse/parallel.hpp"

using namespace ttfuse;

TEST_CASE("splitmix64 reference stream") {
    // First outputs of SplitMix64 seeded with 0 and 1234567.
    Rng a(0);
    CHECK(a.next_u64() == 0xe220a8397b1dcdafULL);
    CHECK(a.next_u64() == 0x6e789e6aa1b965f4ULL);
    Rng b(1234567);
    CHECK(b.next_u64() == 6457827717110365317ULL);
    CHECK(b.next_u64() == 3203168211198807973ULL);
}

TEST_CASE("rng streams are reproducible and in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng r(7);
    std::vector<std::size_t> hist(6, 0);
    for (int i = 0; i < 60000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const auto k = r.below(6);
        REQUIRE(k < 6);
        ++hist[k];
    }
    for (auto h : hist) CHECK(std::abs(static_cast<double>(h) - 10000.0) < 500.0);
    CHECK_THROWS_AS(r.below(0), std::invalid_argument);
}

TEST_CASE("normal variates have unit moments") {
    Rng r(9);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("shuffle permutes and fork splits streams") {
    Rng r(5);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    r.shuffle(std::span<int>(v));
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
    CHECK_FALSE(std::is_sorted(v.begin(), v.end()));

    Rng p(5);
    Rng c = p.fork();
    CHECK(c.next_u64() != p.next_u64());
}

TEST_CASE("tensor construction and indexing") {
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.rank() == 3);
    t.at({1, 2, 3}) = 5.0;
    CHECK(t[23] == 5.0);
    CHECK(t.at({1, 2, 3}) == 5.0);
    const std::size_t idx[] = {1, 0, 2};
    CHECK(t.flat_index(idx) == 14);
    CHECK_THROWS_AS(t.at({2, 0, 0}), std::out_of_range);
    CHECK_THROWS_AS(t.at({0, 0}), std::out_of_range);
    CHECK_THROWS_AS(Tensor({2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), std::invalid_argument);

    const Tensor r = t.reshaped({4, 6});
    CHECK(r.dim(0) == 4);
    CHECK(r[23] == 5.0);
    CHECK_THROWS_AS(t.reshaped({5, 5}), std::invalid_argument);
    CHECK(shape_str(t.shape()) == "(2,3,4)");

    Tensor u = Tensor::vector({1, 2, 3});
    CHECK(u.shape() == Shape{3});
    const std::size_t want[] = {3};
    CHECK_NOTHROW(require_shape(u, want, "u"));
    const std::size_t bad[] = {4};
    CHECK_THROWS_AS(require_shape(u, bad, "u"), std::invalid_argument);
}

TEST_CASE("chunking depends only on the problem size") {
    for (std::size_t n : {0u, 1u, 5u, 8u, 9u, 100u}) {
        CAPTURE(n);
        const std::size_t c = chunk_count(n);
        CHECK(c == std::min<std::size_t>(n, 8));
        if (c == 0) continue;
        CHECK(chunk_begin(n, 0) == 0);
        CHECK(chunk_begin(n, c) == n);
        for (std::size_t k = 0; k < c; ++k) CHECK(chunk_begin(n, k) < chunk_begin(n, k + 1));
    }
}

TEST_CASE("chunked reduction is identical for any worker count") {
    Rng rng(1);
    const auto data = test::random_vector(10007, rng);
    auto run = [&](std::size_t workers) {
        set_worker_count(workers);
        std::vector<double> partial(chunk_count(data.size()), 0.0);
        for_each_chunk(data.size(), [&](std::size_t c, std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) partial[c] += data[i] * 1.0000001;
        });
        double s = 0;
        for (double p : partial) s += p;
        return s;
    };
    const double one = run(1), four = run(4), three = run(3);
    set_worker_count(1);
    CHECK(std::memcmp(&one, &four, sizeof one) == 0);
    CHECK(std::memcmp(&one, &three, sizeof one) == 0);
}

TEST_CASE("exceptions in workers propagate") {
    set_worker_count(4);
    CHECK_THROWS_AS(for_each_chunk(16, [](std::size_t c, std::size_t, std::size_t) {
                        if (c == 3) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
    set_worker_count(1);
}
