#include <cmath>
#include <stdexcept>

#include "ttfuse/nn.hpp"

namespace ttfuse::nn {

BatchNorm::BatchNorm(std::string name, std::size_t channels, double momentum, double eps)
    : momentum_(momentum),
      eps_(eps),
      gamma_(name + "/gamma", Tensor({channels}, 1.0)),
      beta_(name + "/beta", Tensor({channels}, 0.0)),
      running_mean_(name + "/running_mean", Tensor({channels}, 0.0), false),
      running_var_(name + "/running_var", Tensor({channels}, 1.0), false) {}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
    const std::size_t c = channels();
    if (x.rank() < 1 || x.shape().back() != c)
        throw std::invalid_argument("batchnorm " + gamma_.name + ": expected " + std::to_string(c) +
                                    " channels last, got " + shape_str(x.shape()));
    const std::size_t rows = x.size() / c;
    mode_ = mode;
    inv_std_.assign(c, 0.0);
    xhat_ = Tensor(x.shape());
    Tensor y(x.shape());

    if (mode == Mode::Train) {
        if (rows < 2) throw std::invalid_argument("batchnorm " + gamma_.name + ": train mode needs at least 2 rows");
        std::vector<double> mean(c, 0.0), var(c, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < c; ++k) mean[k] += x[r * c + k];
        for (double& m : mean) m /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < c; ++k) {
                const double d = x[r * c + k] - mean[k];
                var[k] += d * d;
            }
        for (std::size_t k = 0; k < c; ++k) {
            var[k] /= static_cast<double>(rows);
            inv_std_[k] = 1.0 / std::sqrt(var[k] + eps_);
            running_mean_.value[k] = momentum_ * running_mean_.value[k] + (1.0 - momentum_) * mean[k];
            running_var_.value[k] = momentum_ * running_var_.value[k] + (1.0 - momentum_) * var[k];
        }
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < c; ++k) {
                const double h = (x[r * c + k] - mean[k]) * inv_std_[k];
                xhat_[r * c + k] = h;
                y[r * c + k] = gamma_.value[k] * h + beta_.value[k];
            }
        return y;
    }

    for (std::size_t k = 0; k < c; ++k) inv_std_[k] = 1.0 / std::sqrt(running_var_.value[k] + eps_);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < c; ++k) {
            const double h = (x[r * c + k] - running_mean_.value[k]) * inv_std_[k];
            xhat_[r * c + k] = h;
            y[r * c + k] = gamma_.value[k] * h + beta_.value[k];
        }
    return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
    require_shape(grad_out, xhat_.shape(), "batchnorm backward");
    const std::size_t c = channels();
    const std::size_t rows = grad_out.size() / c;
    std::vector<double> sum_g(c, 0.0), sum_gh(c, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < c; ++k) {
            const double g = grad_out[r * c + k];
            sum_g[k] += g;
            sum_gh[k] += g * xhat_[r * c + k];
        }
    for (std::size_t k = 0; k < c; ++k) {
        gamma_.grad[k] += sum_gh[k];
        beta_.grad[k] += sum_g[k];
    }
    Tensor gx(grad_out.shape());
    if (mode_ == Mode::Train) {
        const double m = static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < c; ++k) {
                const double g = grad_out[r * c + k];
                gx[r * c + k] = gamma_.value[k] * inv_std_[k] / m * (m * g - sum_g[k] - xhat_[r * c + k] * sum_gh[k]);
            }
    } else {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < c; ++k) gx[r * c + k] = grad_out[r * c + k] * gamma_.value[k] * inv_std_[k];
    }
    return gx;
}

}  // namespace ttfuse::nn
