#include <cmath>
#include <stdexcept>

#include "ttfuse/nn.hpp"
#include "ttfuse/simd.hpp"

namespace ttfuse::nn {

void zero_grads(const ParamList& params) {
    for (Param* p : params) p->grad.fill(0.0);
}

std::size_t count_trainable(const ParamList& params) {
    std::size_t n = 0;
    for (const Param* p : params)
        if (p->trainable) n += p->value.size();
    return n;
}

void he_normal(Tensor& t, std::size_t fan_in, Rng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.values()) v = rng.normal(0.0, stddev);
}

Dense::Dense(std::string name, std::size_t in, std::size_t out, Rng& rng)
    : weight_(name + "/weight", Tensor({out, in})), bias_(name + "/bias", Tensor({out})) {
    he_normal(weight_.value, in, rng);
}

Tensor Dense::forward(const Tensor& x) {
    const std::size_t in = in_features(), out = out_features();
    if (x.rank() != 2 || x.dim(1) != in)
        throw std::invalid_argument("dense " + weight_.name + ": expected input [N, " + std::to_string(in) + "], got " +
                                    shape_str(x.shape()));
    const auto& K = simd::active();
    const std::size_t n = x.dim(0);
    Tensor y({n, out});
    for (std::size_t i = 0; i < n; ++i) {
        double* yi = y.data() + i * out;
        std::copy(bias_.value.data(), bias_.value.data() + out, yi);
        K.gemv_acc(out, in, weight_.value.data(), x.data() + i * in, yi);
    }
    input_ = x;
    return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
    const std::size_t in = in_features(), out = out_features();
    const std::size_t n = input_.dim(0);
    const Shape expected{n, out};
    require_shape(grad_out, expected, "dense backward");
    const auto& K = simd::active();
    Tensor gx({n, in});
    for (std::size_t i = 0; i < n; ++i) {
        const double* g = grad_out.data() + i * out;
        K.gemv_t_acc(out, in, weight_.value.data(), g, gx.data() + i * in);
        K.ger_acc(out, in, g, input_.data() + i * in, weight_.grad.data());
        K.add(out, g, bias_.grad.data());
    }
    return gx;
}

Tensor Relu::forward(const Tensor& x) {
    Tensor y = x;
    shape_ = x.shape();
    mask_.assign(x.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 0.0)
            mask_[i] = 1;
        else
            y[i] = 0.0;
    }
    return y;
}

Tensor Relu::backward(const Tensor& grad_out) const {
    require_shape(grad_out, shape_, "relu backward");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!mask_[i]) g[i] = 0.0;
    return g;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    if (x.rank() < 2) throw std::invalid_argument("global pool needs [N, ..., C]");
    shape_ = x.shape();
    const std::size_t n = x.dim(0), c = x.shape().back();
    const std::size_t inner = x.size() / (n * c);
    const auto& K = simd::active();
    Tensor y({n, c});
    for (std::size_t i = 0; i < n; ++i) {
        double* yi = y.data() + i * c;
        for (std::size_t s = 0; s < inner; ++s) K.add(c, x.data() + (i * inner + s) * c, yi);
        for (std::size_t k = 0; k < c; ++k) yi[k] /= static_cast<double>(inner);
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) const {
    const std::size_t n = shape_.at(0), c = shape_.back();
    const Shape expected{n, c};
    require_shape(grad_out, expected, "global pool backward");
    const std::size_t inner = shape_size(shape_) / (n * c);
    Tensor gx(shape_);
    const double scale = 1.0 / static_cast<double>(inner);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < inner; ++s)
            for (std::size_t k = 0; k < c; ++k) gx[(i * inner + s) * c + k] = grad_out[i * c + k] * scale;
    return gx;
}

Dropout::Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng) {
    if (mode == Mode::Infer || rate_ == 0.0) {
        scale_.assign(x.size(), 1.0);
        return x;
    }
    const double keep = 1.0 / (1.0 - rate_);
    scale_.resize(x.size());
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        scale_[i] = rng.uniform() < rate_ ? 0.0 : keep;
        y[i] *= scale_[i];
    }
    return y;
}

Tensor Dropout::backward(const Tensor& grad_out) const {
    if (grad_out.size() != scale_.size()) throw std::invalid_argument("dropout backward: shape mismatch");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale_[i];
    return g;
}

}  // namespace ttfuse::nn
