#pragma once

// Finite-difference checks of every differentiable building block over
// randomly drawn configurations.

#include <cstdint>
#include <string>
#include <vector>

#include "ttfuse/gradcheck.hpp"

namespace ttfuse {

struct LayerCheck {
    std::string layer;
    std::size_t configs = 0;
    std::size_t checked = 0;  // coordinates compared
    std::size_t kinks = 0;
    double max_rel_error = 0;
    std::string worst;  // description of the worst configuration
    bool pass = false;
};

struct GradSuiteOptions {
    std::uint64_t seed = 1;
    std::size_t configs = 20;         // per layer
    std::size_t coords_per_tensor = 48;
    double tolerance = 1e-4;
    bool include_model = true;        // end-to-end check on a small fusion model
};

std::vector<LayerCheck> run_grad_suite(const GradSuiteOptions& options = {});

}  // namespace ttfuse
