#pragma once

#include <cstddef>

#include "mdsm/tensor.hpp"

namespace mdsm {

struct EnergyAndGrad {
    Tensor energy;  // [B]
    Tensor grad;    // [B, d]
};

// Scalar energy over batches of points. Samplers, likelihood estimators and
// analysis routines only see this interface, so trained networks and
// closed-form energies are interchangeable.
class EnergyModel {
public:
    virtual ~EnergyModel() = default;

    [[nodiscard]] virtual std::size_t dim() const = 0;
    [[nodiscard]] virtual Tensor energy(const Tensor& x) const = 0;
    [[nodiscard]] virtual Tensor energy_grad(const Tensor& x) const = 0;
    [[nodiscard]] virtual EnergyAndGrad energy_and_grad(const Tensor& x) const;

protected:
    void check_input(const Tensor& x, const char* module) const;
};

class ConstantEnergy final : public EnergyModel {
public:
    ConstantEnergy(std::size_t dim, double value) : dim_(dim), value_(value) {}
    [[nodiscard]] std::size_t dim() const override { return dim_; }
    [[nodiscard]] Tensor energy(const Tensor& x) const override;
    [[nodiscard]] Tensor energy_grad(const Tensor& x) const override;

private:
    std::size_t dim_;
    double value_;
};

// E(x) = ||x - center||^2 / (2 scale^2), the energy of N(center, scale^2 I).
class QuadraticEnergy final : public EnergyModel {
public:
    QuadraticEnergy(Tensor center, double scale);
    static QuadraticEnergy isotropic(std::size_t dim, double scale);

    [[nodiscard]] std::size_t dim() const override { return center_.numel(); }
    [[nodiscard]] Tensor energy(const Tensor& x) const override;
    [[nodiscard]] Tensor energy_grad(const Tensor& x) const override;
    [[nodiscard]] const Tensor& center() const noexcept { return center_; }
    [[nodiscard]] double scale() const noexcept { return scale_; }
    // log of the normaliser, (d/2) log(2 pi scale^2).
    [[nodiscard]] double log_partition() const;

private:
    Tensor center_;
    double scale_;
    double inv_two_var_;
    double inv_var_;
};

// factor * E(x). Power-of-two factors commute exactly with rounding, which the
// rescaling-invariance checks rely on.
class ScaledEnergy final : public EnergyModel {
public:
    ScaledEnergy(const EnergyModel& base, double factor) : base_(base), factor_(factor) {}
    [[nodiscard]] std::size_t dim() const override { return base_.dim(); }
    [[nodiscard]] Tensor energy(const Tensor& x) const override;
    [[nodiscard]] Tensor energy_grad(const Tensor& x) const override;
    [[nodiscard]] EnergyAndGrad energy_and_grad(const Tensor& x) const override;

private:
    const EnergyModel& base_;
    double factor_;
};

}  // namespace mdsm
