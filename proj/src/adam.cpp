#include "mdsm/adam.hpp"

#include <cmath>
#include <string>

#include "mdsm/error.hpp"

namespace mdsm {

AdamState AdamState::zeros_like(std::span<const Tensor> params) {
    AdamState s;
    for (const Tensor& p : params) {
        s.first.emplace_back(p.shape());
        s.second.emplace_back(p.shape());
    }
    return s;
}

void adam_update(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, const AdamHyper& hyper) {
    if (grads.size() != params.size() || state.first.size() != params.size() ||
        state.second.size() != params.size()) {
        throw DimensionError("training", "adam: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i].shape() || state.first[i].shape() != params[i].shape() ||
            state.second[i].shape() != params[i].shape()) {
            throw DimensionError("training", "adam: shape mismatch for parameter " + std::to_string(i) + " " +
                                                 shape_string(params[i].shape()) + " vs gradient " +
                                                 shape_string(grads[i].shape()));
        }
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(hyper.beta1, t);
    const double correction2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i].ptr();
        const double* g = grads[i].ptr();
        double* m = state.first[i].ptr();
        double* v = state.second[i].ptr();
        for (std::size_t j = 0; j < params[i].numel(); ++j) {
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p[j] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.eps);
        }
    }
}

}  // namespace mdsm
