#include "mdsm/energy_model.hpp"

#include <cmath>
#include <numbers>

#include "mdsm/error.hpp"
#include "mdsm/kernels.hpp"

namespace mdsm {

EnergyAndGrad EnergyModel::energy_and_grad(const Tensor& x) const { return {energy(x), energy_grad(x)}; }

void EnergyModel::check_input(const Tensor& x, const char* module) const {
    if (x.rank() != 2 || x.shape()[1] != dim()) {
        throw DimensionError(module, "expected input [B," + std::to_string(dim()) + "], got " +
                                         shape_string(x.shape()));
    }
}

Tensor ConstantEnergy::energy(const Tensor& x) const {
    check_input(x, "energy");
    return Tensor::full({x.shape()[0]}, value_);
}

Tensor ConstantEnergy::energy_grad(const Tensor& x) const {
    check_input(x, "energy");
    return Tensor::zeros(x.shape());
}

QuadraticEnergy::QuadraticEnergy(Tensor center, double scale)
    : center_(std::move(center)), scale_(scale) {
    if (!(scale > 0.0)) throw DomainError("energy", "quadratic energy scale must be positive");
    if (center_.rank() != 1) throw DimensionError("energy", "quadratic energy center must be rank 1");
    inv_var_ = 1.0 / (scale * scale);
    inv_two_var_ = 0.5 * inv_var_;
}

QuadraticEnergy QuadraticEnergy::isotropic(std::size_t dim, double scale) {
    return QuadraticEnergy(Tensor::zeros({dim}), scale);
}

Tensor QuadraticEnergy::energy(const Tensor& x) const {
    check_input(x, "energy");
    const std::size_t rows = x.shape()[0];
    const std::size_t d = dim();
    Tensor out({rows});
    std::vector<double> diff(d);
    for (std::size_t r = 0; r < rows; ++r) {
        kernels::active().sub(x.ptr() + r * d, center_.ptr(), diff.data(), d);
        out[r] = kernels::active().dot(diff.data(), diff.data(), d) * inv_two_var_;
    }
    return out;
}

Tensor QuadraticEnergy::energy_grad(const Tensor& x) const {
    check_input(x, "energy");
    const std::size_t rows = x.shape()[0];
    const std::size_t d = dim();
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        kernels::active().sub(x.ptr() + r * d, center_.ptr(), out.ptr() + r * d, d);
    }
    kernels::active().scale(out.ptr(), inv_var_, out.ptr(), out.numel());
    return out;
}

double QuadraticEnergy::log_partition() const {
    return 0.5 * static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi * scale_ * scale_);
}

Tensor ScaledEnergy::energy(const Tensor& x) const {
    Tensor e = base_.energy(x);
    kernels::active().scale(e.ptr(), factor_, e.ptr(), e.numel());
    return e;
}

Tensor ScaledEnergy::energy_grad(const Tensor& x) const {
    Tensor g = base_.energy_grad(x);
    kernels::active().scale(g.ptr(), factor_, g.ptr(), g.numel());
    return g;
}

EnergyAndGrad ScaledEnergy::energy_and_grad(const Tensor& x) const {
    EnergyAndGrad eg = base_.energy_and_grad(x);
    kernels::active().scale(eg.energy.ptr(), factor_, eg.energy.ptr(), eg.energy.numel());
    kernels::active().scale(eg.grad.ptr(), factor_, eg.grad.ptr(), eg.grad.numel());
    return eg;
}

}  // namespace mdsm
