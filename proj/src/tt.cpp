#include "ttfuse/tt.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ttfuse/errors.hpp"
#include "ttfuse/simd.hpp"

namespace ttfuse {

namespace {

std::size_t product(const std::vector<std::size_t>& v) {
    std::size_t p = 1;
    for (std::size_t x : v) p *= x;
    return p;
}

// Geometry of one contraction step: in[a, p, c] -> out[a, q, c] with
// p = (r_{k-1}, i_k) and q = (j_k, r_k).
struct Step {
    std::size_t a, p, q, c;
};

std::vector<Step> plan(const TTLayerSpec& spec) {
    std::vector<Step> steps;
    const std::size_t d = spec.order();
    std::size_t a = 1;
    std::size_t c = spec.input_size();
    for (std::size_t k = 0; k < d; ++k) {
        c /= spec.input_modes[k];
        steps.push_back({a, spec.ranks[k] * spec.input_modes[k], spec.output_modes[k] * spec.ranks[k + 1], c});
        a *= spec.output_modes[k];
    }
    return steps;
}

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " contains a non-finite value");
}

}  // namespace

std::size_t TTLayerSpec::input_size() const { return product(input_modes); }
std::size_t TTLayerSpec::output_size() const { return product(output_modes); }

Shape TTLayerSpec::core_shape(std::size_t k) const {
    return {ranks.at(k), input_modes.at(k), output_modes.at(k), ranks.at(k + 1)};
}

void TTLayerSpec::validate() const {
    const std::size_t d = input_modes.size();
    if (d == 0) throw std::invalid_argument("TT spec needs at least one core");
    if (output_modes.size() != d) throw std::invalid_argument("TT spec: input and output mode counts differ");
    if (ranks.size() != d + 1) throw std::invalid_argument("TT spec: expected " + std::to_string(d + 1) + " ranks");
    if (ranks.front() != 1 || ranks.back() != 1) throw std::invalid_argument("TT spec: boundary ranks must be 1");
    for (std::size_t k = 0; k < d; ++k)
        if (input_modes[k] == 0 || output_modes[k] == 0) throw std::invalid_argument("TT spec: modes must be positive");
    for (std::size_t r : ranks)
        if (r == 0) throw std::invalid_argument("TT spec: ranks must be positive");
}

TTLayerSpec TTLayerSpec::fusion_full(bool bias) {
    return TTLayerSpec{{3, 43, 129, 43, 3}, {4, 4, 4, 3, 2}, {1, 2, 4, 4, 2, 1}, bias};
}

void validate_cores(const TTLayerSpec& spec, const TTCores& cores) {
    spec.validate();
    if (cores.cores.size() != spec.order())
        throw std::invalid_argument("TT cores: expected " + std::to_string(spec.order()) + " cores");
    for (std::size_t k = 0; k < spec.order(); ++k) {
        const Shape expected = spec.core_shape(k);
        require_shape(cores.cores[k], expected, "TT core");
    }
    if (spec.has_bias) {
        const Shape b{spec.output_size()};
        require_shape(cores.bias, b, "TT bias");
    } else if (!cores.bias.empty()) {
        throw std::invalid_argument("TT cores carry a bias but the spec has none");
    }
}

TTCores tt_zeros(const TTLayerSpec& spec) {
    spec.validate();
    TTCores out;
    for (std::size_t k = 0; k < spec.order(); ++k) out.cores.emplace_back(spec.core_shape(k), 0.0);
    if (spec.has_bias) out.bias = Tensor({spec.output_size()}, 0.0);
    return out;
}

TTCores tt_init(const TTLayerSpec& spec, Rng& rng) {
    TTCores out = tt_zeros(spec);
    const std::size_t d = spec.order();
    double paths = 1.0;
    for (std::size_t k = 1; k < d; ++k) paths *= static_cast<double>(spec.ranks[k]);
    const double target = 1.0 / (static_cast<double>(spec.input_size()) * paths);
    const double stddev = std::sqrt(std::pow(target, 1.0 / static_cast<double>(d)));
    for (auto& core : out.cores)
        for (double& v : core.values()) v = rng.normal(0.0, stddev);
    return out;
}

std::size_t tt_core_param_count(const TTLayerSpec& spec) {
    spec.validate();
    std::size_t n = 0;
    for (std::size_t k = 0; k < spec.order(); ++k)
        n += spec.ranks[k] * spec.input_modes[k] * spec.output_modes[k] * spec.ranks[k + 1];
    return n;
}

std::size_t tt_param_count(const TTLayerSpec& spec) {
    return tt_core_param_count(spec) + (spec.has_bias ? spec.output_size() : 0);
}

CompressionReport compression_report(const TTLayerSpec& spec, std::size_t dense_out) {
    if (dense_out == 0) throw std::invalid_argument("compression_report: dense_out must be >= 1");
    CompressionReport r{};
    r.tt_params = tt_core_param_count(spec);
    r.dense_params = dense_out * spec.input_size();
    r.ratio = static_cast<double>(r.tt_params) / static_cast<double>(r.dense_params);
    return r;
}

std::vector<double> tt_forward(const TTLayerSpec& spec, const TTCores& cores, std::span<const double> x,
                               TTTrace* trace) {
    validate_cores(spec, cores);
    if (x.size() != spec.input_size())
        throw std::invalid_argument("tt_forward: input length " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(spec.input_size()));
    const auto& K = simd::active();
    const std::vector<Step> steps = plan(spec);
    std::vector<double> cur(x.begin(), x.end());
    if (trace) trace->stages.clear();
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const Step& s = steps[k];
        const double* g = cores.cores[k].data();
        std::vector<double> next(s.a * s.q * s.c, 0.0);
        for (std::size_t a = 0; a < s.a; ++a) {
            double* out = next.data() + a * s.q * s.c;
            const double* in = cur.data() + a * s.p * s.c;
            for (std::size_t p = 0; p < s.p; ++p) K.ger_acc(s.q, s.c, g + p * s.q, in + p * s.c, out);
        }
        if (trace)
            trace->stages.push_back(std::move(cur));
        cur = std::move(next);
    }
    if (spec.has_bias) K.add(cur.size(), cores.bias.data(), cur.data());
    return cur;
}

TTGradients tt_backward(const TTLayerSpec& spec, const TTCores& cores, std::span<const double> x,
                        std::span<const double> grad_out) {
    TTTrace trace;
    tt_forward(spec, cores, x, &trace);
    return tt_backward(spec, cores, trace, grad_out);
}

TTGradients tt_backward(const TTLayerSpec& spec, const TTCores& cores, const TTTrace& trace,
                        std::span<const double> grad_out) {
    validate_cores(spec, cores);
    if (grad_out.size() != spec.output_size())
        throw std::invalid_argument("tt_backward: grad_out length " + std::to_string(grad_out.size()) +
                                    ", expected " + std::to_string(spec.output_size()));
    const std::vector<Step> steps = plan(spec);
    if (trace.stages.size() != steps.size()) throw std::invalid_argument("tt_backward: trace does not match spec");
    const auto& K = simd::active();

    TTGradients out;
    out.grad_cores = tt_zeros(spec);
    if (spec.has_bias) std::copy(grad_out.begin(), grad_out.end(), out.grad_cores.bias.data());

    std::vector<double> grad(grad_out.begin(), grad_out.end());
    for (std::size_t k = steps.size(); k-- > 0;) {
        const Step& s = steps[k];
        const std::vector<double>& in = trace.stages[k];
        const double* g = cores.cores[k].data();
        double* gg = out.grad_cores.cores[k].data();
        std::vector<double> grad_in(s.a * s.p * s.c, 0.0);
        for (std::size_t a = 0; a < s.a; ++a) {
            const double* go = grad.data() + a * s.q * s.c;
            const double* xin = in.data() + a * s.p * s.c;
            double* gi = grad_in.data() + a * s.p * s.c;
            for (std::size_t p = 0; p < s.p; ++p) {
                K.gemv_acc(s.q, s.c, go, xin + p * s.c, gg + p * s.q);
                K.gemv_t_acc(s.q, s.c, go, g + p * s.q, gi + p * s.c);
            }
        }
        grad = std::move(grad_in);
    }
    out.grad_x = std::move(grad);
    return out;
}

Tensor tt_to_dense(const TTLayerSpec& spec, const TTCores& cores, std::size_t max_entries) {
    validate_cores(spec, cores);
    const std::size_t rows = spec.input_size();
    const std::size_t cols = spec.output_size();
    if (cols != 0 && rows > max_entries / cols)
        throw CapacityError("tt_to_dense: " + std::to_string(rows) + " x " + std::to_string(cols) +
                            " exceeds the materialization guard of " + std::to_string(max_entries) + " entries");

    // Sweep cores left to right keeping M[(i_1..i_k), (j_1..j_k), r_k].
    std::vector<double> cur{1.0};
    std::size_t ri = 1, rj = 1;
    for (std::size_t k = 0; k < spec.order(); ++k) {
        const std::size_t r0 = spec.ranks[k], m = spec.input_modes[k], n = spec.output_modes[k],
                          r1 = spec.ranks[k + 1];
        const double* g = cores.cores[k].data();
        std::vector<double> next(ri * m * rj * n * r1, 0.0);
        for (std::size_t I = 0; I < ri; ++I)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t J = 0; J < rj; ++J)
                    for (std::size_t j = 0; j < n; ++j) {
                        double* dst = next.data() + (((I * m + i) * rj + J) * n + j) * r1;
                        const double* src = cur.data() + (I * rj + J) * r0;
                        for (std::size_t a = 0; a < r0; ++a)
                            for (std::size_t b = 0; b < r1; ++b) dst[b] += src[a] * g[((a * m + i) * n + j) * r1 + b];
                    }
        cur = std::move(next);
        ri *= m;
        rj *= n;
    }
    return Tensor({rows, cols}, std::move(cur));
}

Tensor outer_fuse(std::span<const double> vx, std::span<const double> vy, std::span<const double> vz) {
    if (vx.empty() || vy.empty() || vz.empty()) throw std::invalid_argument("outer_fuse: input vectors must be non-empty");
    check_finite(vx, "outer_fuse vx");
    check_finite(vy, "outer_fuse vy");
    check_finite(vz, "outer_fuse vz");
    const std::size_t nx = vx.size() + 1, ny = vy.size() + 1, nz = vz.size() + 1;
    Tensor z({nx, ny, nz});
    std::vector<double> c(nz);
    c[0] = 1.0;
    std::copy(vz.begin(), vz.end(), c.begin() + 1);
    double* out = z.data();
    for (std::size_t i = 0; i < nx; ++i) {
        const double ai = i == 0 ? 1.0 : vx[i - 1];
        for (std::size_t j = 0; j < ny; ++j) {
            const double aij = ai * (j == 0 ? 1.0 : vy[j - 1]);
            double* row = out + (i * ny + j) * nz;
            for (std::size_t k = 0; k < nz; ++k) row[k] = aij * c[k];
        }
    }
    return z;
}

OuterFuseGrad outer_fuse_backward(std::span<const double> vx, std::span<const double> vy,
                                  std::span<const double> vz, std::span<const double> grad) {
    const std::size_t nx = vx.size() + 1, ny = vy.size() + 1, nz = vz.size() + 1;
    if (grad.size() != nx * ny * nz) throw std::invalid_argument("outer_fuse_backward: gradient size mismatch");
    const auto& K = simd::active();
    std::vector<double> a(nx), b(ny), c(nz);
    a[0] = b[0] = c[0] = 1.0;
    std::copy(vx.begin(), vx.end(), a.begin() + 1);
    std::copy(vy.begin(), vy.end(), b.begin() + 1);
    std::copy(vz.begin(), vz.end(), c.begin() + 1);

    // m[i, j] = sum_k grad[i, j, k] c_k
    std::vector<double> m(nx * ny, 0.0);
    K.gemv_acc(nx * ny, nz, grad.data(), c.data(), m.data());
    std::vector<double> ga(nx, 0.0), gb(ny, 0.0), gc(nz, 0.0);
    K.gemv_acc(nx, ny, m.data(), b.data(), ga.data());
    K.gemv_t_acc(nx, ny, m.data(), a.data(), gb.data());
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) K.axpy(nz, a[i] * b[j], grad.data() + (i * ny + j) * nz, gc.data());

    OuterFuseGrad out;
    out.gx.assign(ga.begin() + 1, ga.end());
    out.gy.assign(gb.begin() + 1, gb.end());
    out.gz.assign(gc.begin() + 1, gc.end());
    return out;
}

}  // namespace ttfuse
