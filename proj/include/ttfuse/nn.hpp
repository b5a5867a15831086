#pragma once

// Differentiable layer set. Every layer is batch-first, caches what its
// backward pass needs during forward(), and accumulates parameter gradients
// into Param::grad (callers zero them between steps).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ttfuse/rng.hpp"
#include "ttfuse/tensor.hpp"

namespace ttfuse::nn {

enum class Mode { Train, Infer };

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Param() = default;
    Param(std::string n, Tensor v, bool train = true)
        : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0), trainable(train) {}
};

using ParamList = std::vector<Param*>;

void zero_grads(const ParamList& params);
std::size_t count_trainable(const ParamList& params);

// He-normal fill, stddev sqrt(2 / fan_in).
void he_normal(Tensor& t, std::size_t fan_in, Rng& rng);

class Dense {
public:
    Dense() = default;
    Dense(std::string name, std::size_t in, std::size_t out, Rng& rng);

    // x: [N, in] -> [N, out]
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);
    void collect(ParamList& out) { out.push_back(&weight_); out.push_back(&bias_); }

    std::size_t in_features() const { return weight_.value.dim(1); }
    std::size_t out_features() const { return weight_.value.dim(0); }
    Param& weight() { return weight_; }
    Param& bias() { return bias_; }

private:
    Param weight_;  // (out, in)
    Param bias_;    // (out)
    Tensor input_;
};

class Relu {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    std::vector<unsigned char> mask_;
    Shape shape_;
};

enum class Padding { Valid, Same };

struct ConvGeometry {
    std::size_t in, out, pad_before;
};

// Output length and leading pad for one spatial axis. Throws
// std::invalid_argument when the kernel does not fit the padded input.
ConvGeometry conv_geometry(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding);

// Cross-correlation over channels-last input. The 1-D form is the 2-D form
// with a unit-height kernel; its tensors drop the height axis.
class Conv {
public:
    Conv() = default;
    static Conv conv2d(std::string name, std::size_t kernel, std::size_t in_ch, std::size_t out_ch,
                       std::size_t stride, Padding padding, Rng& rng);
    static Conv conv1d(std::string name, std::size_t kernel, std::size_t in_ch, std::size_t out_ch,
                       std::size_t stride, Padding padding, Rng& rng);

    // 2-D: [N, H, W, C] -> [N, H', W', C'];  1-D: [N, L, C] -> [N, L', C']
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);
    void collect(ParamList& out) { out.push_back(&weight_); out.push_back(&bias_); }

    bool is_1d() const { return one_d_; }
    std::size_t in_channels() const { return in_ch_; }
    std::size_t out_channels() const { return out_ch_; }
    // Output spatial shape (without batch and channel axes).
    Shape output_spatial(std::span<const std::size_t> input_spatial) const;
    Param& weight() { return weight_; }
    Param& bias() { return bias_; }

private:
    bool one_d_ = false;
    std::size_t kh_ = 1, kw_ = 1, in_ch_ = 0, out_ch_ = 0, stride_ = 1;
    Padding padding_ = Padding::Valid;
    Param weight_;  // (kh, kw, C, C') or (k, C, C')
    Param bias_;
    Tensor input_;
};

// Per-channel normalization over every leading axis (channels last).
class BatchNorm {
public:
    BatchNorm() = default;
    BatchNorm(std::string name, std::size_t channels, double momentum = 0.99, double eps = 1e-5);

    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& grad_out);
    // gamma and beta are trainable; the running statistics are not.
    void collect(ParamList& out) {
        out.push_back(&gamma_); out.push_back(&beta_); out.push_back(&running_mean_); out.push_back(&running_var_);
    }

    std::size_t channels() const { return gamma_.value.size(); }
    Param& gamma() { return gamma_; }
    Param& beta() { return beta_; }
    Param& running_mean() { return running_mean_; }
    Param& running_var() { return running_var_; }

private:
    double momentum_ = 0.99, eps_ = 1e-5;
    Param gamma_, beta_, running_mean_, running_var_;
    Mode mode_ = Mode::Infer;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

// conv -> ReLU -> batch norm.
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(Conv conv, std::string name);
    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& grad_out);
    void collect(ParamList& out) { conv_.collect(out); norm_.collect(out); }
    Conv& conv() { return conv_; }
    BatchNorm& norm() { return norm_; }

private:
    Conv conv_;
    Relu relu_;
    BatchNorm norm_;
};

// y = ReLU(x + F(x)), F = two same-padded stride-1 conv blocks.
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(std::string name, std::size_t channels, std::size_t kernel, bool one_d, Rng& rng);
    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& grad_out);
    void collect(ParamList& out) { first_.collect(out); second_.collect(out); }
    std::size_t channels() const { return channels_; }
    ConvBlock& first() { return first_; }
    ConvBlock& second() { return second_; }

private:
    std::size_t channels_ = 0;
    ConvBlock first_, second_;
    Relu out_relu_;
};

// Mean over every axis between batch and channels: [N, ..., C] -> [N, C].
class GlobalAvgPool {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    Shape shape_;
};

// Standard LSTM, gate order (input, forget, cell, output).
class Lstm {
public:
    Lstm() = default;
    Lstm(std::string name, std::size_t in, std::size_t hidden, Rng& rng);

    // x: [N, T, in] -> [N, T, H] when return_all, else [N, H] (last step).
    Tensor forward(const Tensor& x, bool return_all);
    Tensor backward(const Tensor& grad_out);
    void collect(ParamList& out) { out.push_back(&w_); out.push_back(&u_); out.push_back(&b_); }

    std::size_t hidden() const { return hidden_; }
    std::size_t in_features() const { return in_; }
    Param& input_weights() { return w_; }
    Param& recurrent_weights() { return u_; }
    Param& bias() { return b_; }

private:
    std::size_t in_ = 0, hidden_ = 0;
    Param w_;  // (4H, in)
    Param u_;  // (4H, H)
    Param b_;  // (4H)
    bool return_all_ = false;
    Tensor input_;
    // Per (n, t): activated gates [4H], cell state and hidden state [H].
    std::vector<double> gates_, cells_, hiddens_;
};

// Inverted dropout.
class Dropout {
public:
    explicit Dropout(double rate = 0.0);
    Tensor forward(const Tensor& x, Mode mode, Rng& rng);
    Tensor backward(const Tensor& grad_out) const;
    double rate() const { return rate_; }

private:
    double rate_;
    std::vector<double> scale_;
};

std::vector<double> softmax(std::span<const double> logits);

struct LossGrad {
    double loss;
    std::vector<double> grad;
};

// -w[target] * log softmax(logits)[target], with the matching gradient.
LossGrad weighted_softmax_xent(std::span<const double> logits, std::size_t target,
                               std::span<const double> class_weights);

// Batch form over logits [N, K]: per-sample weighted losses summed and divided
// by the summed weight of the targets (a plain mean for equal weights).
struct BatchLoss {
    double loss;
    Tensor grad;
};
BatchLoss weighted_softmax_xent(const Tensor& logits, std::span<const std::size_t> targets,
                                std::span<const double> class_weights);

struct AdamState {
    double alpha = 0.0005, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t t = 0;
    std::vector<Tensor> m, v;
};

// Bias-corrected Adam over every trainable param. Throws NumericError naming
// the parameter if a gradient is not finite; nothing is updated in that case.
void adam_step(AdamState& state, const ParamList& params);

}  // namespace ttfuse::nn
