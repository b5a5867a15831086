#pragma once

#include <cmath>
#include <vector>

#include "ttfuse/rng.hpp"
#include "ttfuse/tensor.hpp"

namespace test {

inline ttfuse::Tensor random_tensor(ttfuse::Shape shape, ttfuse::Rng& rng, double scale = 1.0) {
    ttfuse::Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng.normal(0.0, scale);
    return t;
}

inline std::vector<double> random_vector(std::size_t n, ttfuse::Rng& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal(0.0, scale);
    return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace test
