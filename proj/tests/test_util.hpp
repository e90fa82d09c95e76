#pragma once

#include <cmath>
#include <cstdint>

#include "mdsm/rng.hpp"
#include "mdsm/tensor.hpp"

namespace mdsm::testutil {

inline Tensor uniform_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
    return t;
}

inline Tensor normal_tensor(Shape shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    rng.fill_normal(t.data(), 0.0, stddev);
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace mdsm::testutil
