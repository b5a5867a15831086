#pragma once

// Tensor-Train matrix layer and the augmented outer-product fusion tensor.
//
// A TT layer with input modes m_1..m_d, output modes n_1..n_d and ranks
// r_0..r_d (r_0 = r_d = 1) stores a (prod m) x (prod n) weight matrix as cores
// G_k of shape (r_{k-1}, m_k, n_k, r_k):
//
//   W[(i_1..i_d), (j_1..j_d)] = G_1[:, i_1, j_1, :] * ... * G_d[:, i_d, j_d, :]
//
// and computes y = x W (+ bias) without ever forming W.

#include <cstddef>
#include <span>
#include <vector>

#include "ttfuse/rng.hpp"
#include "ttfuse/tensor.hpp"

namespace ttfuse {

struct TTLayerSpec {
    std::vector<std::size_t> input_modes;
    std::vector<std::size_t> output_modes;
    std::vector<std::size_t> ranks;
    bool has_bias = true;

    std::size_t order() const { return input_modes.size(); }
    std::size_t input_size() const;
    std::size_t output_size() const;
    Shape core_shape(std::size_t k) const;

    // Throws std::invalid_argument on any violated invariant.
    void validate() const;

    // 129^3 -> 384 fusion layer: modes (3,43,129,43,3) -> (4,4,4,3,2), ranks (1,2,4,4,2,1).
    static TTLayerSpec fusion_full(bool bias = true);

    friend bool operator==(const TTLayerSpec&, const TTLayerSpec&) = default;
};

struct TTCores {
    std::vector<Tensor> cores;
    Tensor bias;  // empty when the spec has no bias
};

void validate_cores(const TTLayerSpec& spec, const TTCores& cores);

TTCores tt_zeros(const TTLayerSpec& spec);

// Zero-mean Gaussian cores scaled so that Var(W_ij) = 1 / prod(m), i.e. the
// reconstructed matrix preserves unit input variance. Bias starts at zero.
TTCores tt_init(const TTLayerSpec& spec, Rng& rng);

std::size_t tt_param_count(const TTLayerSpec& spec);
std::size_t tt_core_param_count(const TTLayerSpec& spec);

struct CompressionReport {
    std::size_t tt_params;     // core parameters only
    std::size_t dense_params;  // dense_out * prod(m), no bias
    double ratio;              // tt_params / dense_params
};

CompressionReport compression_report(const TTLayerSpec& spec, std::size_t dense_out);

// Intermediate states of the left-to-right contraction; stage k holds the
// input to core k laid out as (j_1..j_{k-1}, r_{k-1}, i_k..i_d).
struct TTTrace {
    std::vector<std::vector<double>> stages;
};

std::vector<double> tt_forward(const TTLayerSpec& spec, const TTCores& cores, std::span<const double> x,
                               TTTrace* trace = nullptr);

struct TTGradients {
    TTCores grad_cores;
    std::vector<double> grad_x;
};

// Exact gradients of dot(y, grad_out). The trace overload skips the forward
// recomputation.
TTGradients tt_backward(const TTLayerSpec& spec, const TTCores& cores, std::span<const double> x,
                        std::span<const double> grad_out);
TTGradients tt_backward(const TTLayerSpec& spec, const TTCores& cores, const TTTrace& trace,
                        std::span<const double> grad_out);

inline constexpr std::size_t kDenseGuard = 10'000'000;

// Materializes W with shape (prod m, prod n). Throws CapacityError above the
// guard.
Tensor tt_to_dense(const TTLayerSpec& spec, const TTCores& cores, std::size_t max_entries = kDenseGuard);

// z = (1, vx) (x) (1, vy) (x) (1, vz), shape (|vx|+1, |vy|+1, |vz|+1).
Tensor outer_fuse(std::span<const double> vx, std::span<const double> vy, std::span<const double> vz);

struct OuterFuseGrad {
    std::vector<double> gx, gy, gz;
};

OuterFuseGrad outer_fuse_backward(std::span<const double> vx, std::span<const double> vy,
                                  std::span<const double> vz, std::span<const double> grad);

}  // namespace ttfuse
