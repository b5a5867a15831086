#include <stdexcept>

#include "ttfuse/nn.hpp"
#include "ttfuse/parallel.hpp"
#include "ttfuse/simd.hpp"

namespace ttfuse::nn {

ConvGeometry conv_geometry(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
    if (stride == 0) throw std::invalid_argument("convolution stride must be >= 1");
    if (kernel == 0) throw std::invalid_argument("convolution kernel must be >= 1");
    if (padding == Padding::Valid) {
        if (kernel > in)
            throw std::invalid_argument("kernel " + std::to_string(kernel) + " larger than input " + std::to_string(in));
        return {in, (in - kernel) / stride + 1, 0};
    }
    const std::size_t out = (in + stride - 1) / stride;
    const std::size_t needed = (out - 1) * stride + kernel;
    const std::size_t total = needed > in ? needed - in : 0;
    if (kernel > in + total)
        throw std::invalid_argument("kernel " + std::to_string(kernel) + " larger than padded input");
    return {in, out, total / 2};
}

Conv Conv::conv2d(std::string name, std::size_t kernel, std::size_t in_ch, std::size_t out_ch, std::size_t stride,
                  Padding padding, Rng& rng) {
    if (in_ch == 0 || out_ch == 0) throw std::invalid_argument("conv2d: channel counts must be positive");
    Conv c;
    c.one_d_ = false;
    c.kh_ = c.kw_ = kernel;
    c.in_ch_ = in_ch;
    c.out_ch_ = out_ch;
    c.stride_ = stride;
    c.padding_ = padding;
    c.weight_ = Param(name + "/weight", Tensor({kernel, kernel, in_ch, out_ch}));
    c.bias_ = Param(name + "/bias", Tensor({out_ch}));
    he_normal(c.weight_.value, kernel * kernel * in_ch, rng);
    return c;
}

Conv Conv::conv1d(std::string name, std::size_t kernel, std::size_t in_ch, std::size_t out_ch, std::size_t stride,
                  Padding padding, Rng& rng) {
    if (in_ch == 0 || out_ch == 0) throw std::invalid_argument("conv1d: channel counts must be positive");
    Conv c;
    c.one_d_ = true;
    c.kh_ = 1;
    c.kw_ = kernel;
    c.in_ch_ = in_ch;
    c.out_ch_ = out_ch;
    c.stride_ = stride;
    c.padding_ = padding;
    c.weight_ = Param(name + "/weight", Tensor({kernel, in_ch, out_ch}));
    c.bias_ = Param(name + "/bias", Tensor({out_ch}));
    he_normal(c.weight_.value, kernel * in_ch, rng);
    return c;
}

Shape Conv::output_spatial(std::span<const std::size_t> s) const {
    if (one_d_) return {conv_geometry(s[0], kw_, stride_, padding_).out};
    return {conv_geometry(s[0], kh_, stride_, padding_).out, conv_geometry(s[1], kw_, stride_, padding_).out};
}

namespace {

struct Dims {
    std::size_t n, h, w, c;
};

// Views 1-D tensors as height-1 images.
Dims as_image(const Tensor& x, bool one_d, std::size_t channels, const std::string& name) {
    if (one_d) {
        if (x.rank() != 3 || x.dim(2) != channels)
            throw std::invalid_argument("conv1d " + name + ": expected [N, L, " + std::to_string(channels) + "], got " +
                                        shape_str(x.shape()));
        return {x.dim(0), 1, x.dim(1), x.dim(2)};
    }
    if (x.rank() != 4 || x.dim(3) != channels)
        throw std::invalid_argument("conv2d " + name + ": expected [N, H, W, " + std::to_string(channels) + "], got " +
                                    shape_str(x.shape()));
    return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

}  // namespace

Tensor Conv::forward(const Tensor& x) {
    const Dims d = as_image(x, one_d_, in_ch_, weight_.name);
    const ConvGeometry gh = one_d_ ? ConvGeometry{1, 1, 0} : conv_geometry(d.h, kh_, stride_, padding_);
    const ConvGeometry gw = conv_geometry(d.w, kw_, stride_, padding_);
    const std::size_t sh = one_d_ ? 1 : stride_;
    const std::size_t oh = gh.out, ow = gw.out;
    Tensor y = one_d_ ? Tensor({d.n, ow, out_ch_}) : Tensor({d.n, oh, ow, out_ch_});
    const double* w = weight_.value.data();
    const double* b = bias_.value.data();
    const std::size_t block = in_ch_ * out_ch_;

    for_each_chunk(d.n, [&](std::size_t, std::size_t begin, std::size_t end) {
        const auto& K = simd::active();
        for (std::size_t n = begin; n < end; ++n) {
            const double* xn = x.data() + n * d.h * d.w * d.c;
            double* yn = y.data() + n * oh * ow * out_ch_;
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double* out = yn + (oy * ow + ox) * out_ch_;
                    std::copy(b, b + out_ch_, out);
                    for (std::size_t ky = 0; ky < kh_; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * sh + ky) -
                                                  static_cast<std::ptrdiff_t>(gh.pad_before);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                        for (std::size_t kx = 0; kx < kw_; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                                      static_cast<std::ptrdiff_t>(gw.pad_before);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                            const double* xin = xn + (static_cast<std::size_t>(iy) * d.w + static_cast<std::size_t>(ix)) * d.c;
                            K.gemv_t_acc(in_ch_, out_ch_, w + (ky * kw_ + kx) * block, xin, out);
                        }
                    }
                }
        }
    });
    input_ = x;
    return y;
}

Tensor Conv::backward(const Tensor& grad_out) {
    const Dims d = as_image(input_, one_d_, in_ch_, weight_.name);
    const ConvGeometry gh = one_d_ ? ConvGeometry{1, 1, 0} : conv_geometry(d.h, kh_, stride_, padding_);
    const ConvGeometry gw = conv_geometry(d.w, kw_, stride_, padding_);
    const std::size_t sh = one_d_ ? 1 : stride_;
    const std::size_t oh = gh.out, ow = gw.out;
    const Shape expected = one_d_ ? Shape{d.n, ow, out_ch_} : Shape{d.n, oh, ow, out_ch_};
    require_shape(grad_out, expected, "conv backward");

    Tensor gx(input_.shape());
    const double* w = weight_.value.data();
    const std::size_t block = in_ch_ * out_ch_;
    const std::size_t chunks = chunk_count(d.n);
    std::vector<std::vector<double>> gw_parts(chunks), gb_parts(chunks);

    for_each_chunk(d.n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        const auto& K = simd::active();
        std::vector<double>& gwp = gw_parts[chunk];
        std::vector<double>& gbp = gb_parts[chunk];
        gwp.assign(weight_.value.size(), 0.0);
        gbp.assign(out_ch_, 0.0);
        for (std::size_t n = begin; n < end; ++n) {
            const double* xn = input_.data() + n * d.h * d.w * d.c;
            double* gxn = gx.data() + n * d.h * d.w * d.c;
            const double* gyn = grad_out.data() + n * oh * ow * out_ch_;
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const double* g = gyn + (oy * ow + ox) * out_ch_;
                    K.add(out_ch_, g, gbp.data());
                    for (std::size_t ky = 0; ky < kh_; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * sh + ky) -
                                                  static_cast<std::ptrdiff_t>(gh.pad_before);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                        for (std::size_t kx = 0; kx < kw_; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                                      static_cast<std::ptrdiff_t>(gw.pad_before);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                            const std::size_t off = (static_cast<std::size_t>(iy) * d.w + static_cast<std::size_t>(ix)) * d.c;
                            const std::size_t wo = (ky * kw_ + kx) * block;
                            K.gemv_acc(in_ch_, out_ch_, w + wo, g, gxn + off);
                            K.ger_acc(in_ch_, out_ch_, xn + off, g, gwp.data() + wo);
                        }
                    }
                }
        }
    });

    const auto& K = simd::active();
    for (std::size_t c = 0; c < chunks; ++c) {
        K.add(gw_parts[c].size(), gw_parts[c].data(), weight_.grad.data());
        K.add(out_ch_, gb_parts[c].data(), bias_.grad.data());
    }
    return gx;
}

ConvBlock::ConvBlock(Conv conv, std::string name) : conv_(std::move(conv)), norm_(std::move(name), conv_.out_channels()) {}

Tensor ConvBlock::forward(const Tensor& x, Mode mode) { return norm_.forward(relu_.forward(conv_.forward(x)), mode); }

Tensor ConvBlock::backward(const Tensor& grad_out) {
    return conv_.backward(relu_.backward(norm_.backward(grad_out)));
}

ResidualBlock::ResidualBlock(std::string name, std::size_t channels, std::size_t kernel, bool one_d, Rng& rng)
    : channels_(channels) {
    auto make = [&](const std::string& suffix) {
        return one_d ? Conv::conv1d(name + "/" + suffix, kernel, channels, channels, 1, Padding::Same, rng)
                     : Conv::conv2d(name + "/" + suffix, kernel, channels, channels, 1, Padding::Same, rng);
    };
    first_ = ConvBlock(make("conv_a"), name + "/bn_a");
    second_ = ConvBlock(make("conv_b"), name + "/bn_b");
}

Tensor ResidualBlock::forward(const Tensor& x, Mode mode) {
    if (x.shape().back() != channels_)
        throw std::invalid_argument("residual block: input has " + std::to_string(x.shape().back()) +
                                    " channels, block expects " + std::to_string(channels_));
    Tensor f = second_.forward(first_.forward(x, mode), mode);
    const auto& K = simd::active();
    K.add(x.size(), x.data(), f.data());
    return out_relu_.forward(f);
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
    Tensor g = out_relu_.backward(grad_out);
    Tensor gx = first_.backward(second_.backward(g));
    simd::active().add(g.size(), g.data(), gx.data());
    return gx;
}

}  // namespace ttfuse::nn
