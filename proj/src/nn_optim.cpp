#include <cmath>

#include "ttfuse/errors.hpp"
#include "ttfuse/nn.hpp"

namespace ttfuse::nn {

void adam_step(AdamState& state, const ParamList& params) {
    for (const Param* p : params) {
        if (!p->trainable) continue;
        for (double g : p->grad.values())
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + p->name + "'");
    }
    if (state.m.empty()) {
        for (const Param* p : params) {
            state.m.emplace_back(p->value.shape(), 0.0);
            state.v.emplace_back(p->value.shape(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam state does not match parameter list");

    ++state.t;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        if (!p.trainable) continue;
        require_shape(state.m[i], p.value.shape(), "adam moment");
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p.value[j] -= state.alpha * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace ttfuse::nn
