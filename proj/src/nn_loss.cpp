#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ttfuse/nn.hpp"

namespace ttfuse::nn {

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
    for (double& v : p) v /= sum;
    return p;
}

LossGrad weighted_softmax_xent(std::span<const double> logits, std::size_t target,
                               std::span<const double> class_weights) {
    const std::size_t n = logits.size();
    if (n < 2) throw std::invalid_argument("softmax cross-entropy needs at least 2 classes");
    if (class_weights.size() != n) throw std::invalid_argument("class weight count does not match logits");
    if (target >= n) throw std::invalid_argument("target class " + std::to_string(target) + " out of range");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - mx);
    const double log_z = mx + std::log(sum);
    const double w = class_weights[target];
    LossGrad out{w * (log_z - logits[target]), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) out.grad[i] = w * std::exp(logits[i] - log_z);
    out.grad[target] -= w;
    return out;
}

BatchLoss weighted_softmax_xent(const Tensor& logits, std::span<const std::size_t> targets,
                                std::span<const double> class_weights) {
    if (logits.rank() != 2 || logits.dim(0) != targets.size())
        throw std::invalid_argument("batch cross-entropy: logits must be [N, K] with N targets");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    BatchLoss out{0.0, Tensor(logits.shape())};
    // Normalize by the total weight of the targets, not by n, so a head's loss
    // scale does not depend on how many classes share its unit weight mass.
    if (class_weights.size() != k) throw std::invalid_argument("class weight count does not match logits");
    double total = 0.0;
    for (std::size_t t : targets) {
        if (t >= k) throw std::invalid_argument("batch cross-entropy: target out of range");
        total += class_weights[t];
    }
    if (!(total > 0.0)) return out;
    const double scale = 1.0 / total;
    for (std::size_t i = 0; i < n; ++i) {
        const LossGrad lg =
            weighted_softmax_xent(std::span<const double>(logits.data() + i * k, k), targets[i], class_weights);
        out.loss += lg.loss * scale;
        for (std::size_t j = 0; j < k; ++j) out.grad[i * k + j] = lg.grad[j] * scale;
    }
    return out;
}

}  // namespace ttfuse::nn
