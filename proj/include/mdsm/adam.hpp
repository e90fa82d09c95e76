#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdsm/tensor.hpp"

namespace mdsm {

struct AdamHyper {
    double learning_rate = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> first;
    std::vector<Tensor> second;
    std::uint64_t step = 0;

    static AdamState zeros_like(std::span<const Tensor> params);
};

// One bias-corrected Adam update, in place. Throws DimensionError when grads
// or state do not match the parameter shapes.
void adam_update(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, const AdamHyper& hyper);

}  // namespace mdsm
