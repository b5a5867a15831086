#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace ttfuse {

struct GradCheckOptions {
    double eps = 1e-5;
    // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
    double floor = 1e-4;
    // Relative tolerance used to decide whether a coordinate sits on a kink.
    double tolerance = 1e-4;
    // Check at most this many coordinates (uniformly sampled, seeded).
    std::size_t max_coords = SIZE_MAX;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    // Coordinates where the second difference shows a slope discontinuity
    // (e.g. a ReLU switching inside [x - eps, x + eps]) large enough to
    // corrupt the central difference; they are excluded from max_rel_error.
    std::size_t kinks = 0;
    std::size_t worst_index = 0;
};

// Compares analytic[i] against (f(x + eps e_i) - f(x - eps e_i)) / 2 eps.
// x is perturbed in place and restored.
GradCheckResult grad_check(const std::function<double()>& f, std::span<double> x,
                           std::span<const double> analytic, const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace ttfuse
