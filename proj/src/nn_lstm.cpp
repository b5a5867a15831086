#include <cmath>
#include <stdexcept>

#include "ttfuse/nn.hpp"
#include "ttfuse/simd.hpp"

namespace ttfuse::nn {

namespace {
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

Lstm::Lstm(std::string name, std::size_t in, std::size_t hidden, Rng& rng)
    : in_(in),
      hidden_(hidden),
      w_(name + "/input_weights", Tensor({4 * hidden, in})),
      u_(name + "/recurrent_weights", Tensor({4 * hidden, hidden})),
      b_(name + "/bias", Tensor({4 * hidden})) {
    if (in == 0 || hidden == 0) throw std::invalid_argument("lstm: sizes must be positive");
    const double sd = 1.0 / std::sqrt(static_cast<double>(in + hidden));
    for (double& v : w_.value.values()) v = rng.normal(0.0, sd);
    for (double& v : u_.value.values()) v = rng.normal(0.0, sd);
    for (std::size_t k = 0; k < hidden; ++k) b_.value[hidden + k] = 1.0;  // forget gate
}

Tensor Lstm::forward(const Tensor& x, bool return_all) {
    if (x.rank() != 3 || x.dim(2) != in_)
        throw std::invalid_argument("lstm " + w_.name + ": expected [N, T, " + std::to_string(in_) + "], got " +
                                    shape_str(x.shape()));
    const std::size_t n = x.dim(0), steps = x.dim(1), h = hidden_;
    const auto& K = simd::active();
    input_ = x;
    return_all_ = return_all;
    gates_.assign(n * steps * 4 * h, 0.0);
    cells_.assign(n * steps * h, 0.0);
    hiddens_.assign(n * steps * h, 0.0);
    const std::vector<double> zeros(h, 0.0);

    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = 0; t < steps; ++t) {
            double* z = gates_.data() + (s * steps + t) * 4 * h;
            std::copy(b_.value.data(), b_.value.data() + 4 * h, z);
            K.gemv_acc(4 * h, in_, w_.value.data(), x.data() + (s * steps + t) * in_, z);
            const double* h_prev = t == 0 ? zeros.data() : hiddens_.data() + (s * steps + t - 1) * h;
            const double* c_prev = t == 0 ? zeros.data() : cells_.data() + (s * steps + t - 1) * h;
            K.gemv_acc(4 * h, h, u_.value.data(), h_prev, z);
            double* c = cells_.data() + (s * steps + t) * h;
            double* hh = hiddens_.data() + (s * steps + t) * h;
            for (std::size_t k = 0; k < h; ++k) {
                const double ig = sigmoid(z[k]);
                const double fg = sigmoid(z[h + k]);
                const double gg = std::tanh(z[2 * h + k]);
                const double og = sigmoid(z[3 * h + k]);
                z[k] = ig;
                z[h + k] = fg;
                z[2 * h + k] = gg;
                z[3 * h + k] = og;
                c[k] = fg * c_prev[k] + ig * gg;
                hh[k] = og * std::tanh(c[k]);
            }
        }

    if (return_all) return Tensor({n, steps, h}, hiddens_);
    Tensor last({n, h});
    for (std::size_t s = 0; s < n; ++s)
        std::copy_n(hiddens_.data() + (s * steps + steps - 1) * h, h, last.data() + s * h);
    return last;
}

Tensor Lstm::backward(const Tensor& grad_out) {
    const std::size_t n = input_.dim(0), steps = input_.dim(1), h = hidden_;
    const Shape expected = return_all_ ? Shape{n, steps, h} : Shape{n, h};
    require_shape(grad_out, expected, "lstm backward");
    const auto& K = simd::active();
    Tensor gx(input_.shape());
    std::vector<double> dh(h), dc(h), dz(4 * h);
    const std::vector<double> zeros(h, 0.0);

    for (std::size_t s = 0; s < n; ++s) {
        std::fill(dh.begin(), dh.end(), 0.0);
        std::fill(dc.begin(), dc.end(), 0.0);
        for (std::size_t t = steps; t-- > 0;) {
            if (return_all_)
                K.add(h, grad_out.data() + (s * steps + t) * h, dh.data());
            else if (t == steps - 1)
                K.add(h, grad_out.data() + s * h, dh.data());
            const double* z = gates_.data() + (s * steps + t) * 4 * h;
            const double* c = cells_.data() + (s * steps + t) * h;
            const double* c_prev = t == 0 ? zeros.data() : cells_.data() + (s * steps + t - 1) * h;
            const double* h_prev = t == 0 ? zeros.data() : hiddens_.data() + (s * steps + t - 1) * h;
            for (std::size_t k = 0; k < h; ++k) {
                const double ig = z[k], fg = z[h + k], gg = z[2 * h + k], og = z[3 * h + k];
                const double tc = std::tanh(c[k]);
                const double d_o = dh[k] * tc;
                const double d_c = dh[k] * og * (1.0 - tc * tc) + dc[k];
                dz[k] = d_c * gg * ig * (1.0 - ig);
                dz[h + k] = d_c * c_prev[k] * fg * (1.0 - fg);
                dz[2 * h + k] = d_c * ig * (1.0 - gg * gg);
                dz[3 * h + k] = d_o * og * (1.0 - og);
                dc[k] = d_c * fg;
            }
            K.add(4 * h, dz.data(), b_.grad.data());
            K.ger_acc(4 * h, in_, dz.data(), input_.data() + (s * steps + t) * in_, w_.grad.data());
            K.ger_acc(4 * h, h, dz.data(), h_prev, u_.grad.data());
            K.gemv_t_acc(4 * h, in_, w_.value.data(), dz.data(), gx.data() + (s * steps + t) * in_);
            std::fill(dh.begin(), dh.end(), 0.0);
            K.gemv_t_acc(4 * h, h, u_.value.data(), dz.data(), dh.data());
        }
    }
    return gx;
}

}  // namespace ttfuse::nn
