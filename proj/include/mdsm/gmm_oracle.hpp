#pragma once

#include <cstddef>
#include <vector>

#include "mdsm/energy_model.hpp"
#include "mdsm/rng.hpp"
#include "mdsm/tensor.hpp"

namespace mdsm {

// Isotropic Gaussian mixture sum_k w_k N(mu_k, s^2 I) with closed-form
// densities and scores of its smoothed versions (component std sqrt(s^2 + sigma^2)).
class GmmOracle {
public:
    // Throws ConfigError unless weights are non-negative and sum to 1 within
    // 1e-12, and DimensionError on shape mismatch. s may be 0 (point masses).
    GmmOracle(Tensor means, double component_std, std::vector<double> weights);
    // Equal weights.
    GmmOracle(Tensor means, double component_std);

    // m equally weighted modes on a circle in the plane.
    static GmmOracle ring(std::size_t modes = 8, double radius = 1.0, double component_std = 0.05,
                          double center_x = 0.0, double center_y = 0.0);

    [[nodiscard]] std::size_t dim() const noexcept { return means_.shape()[1]; }
    [[nodiscard]] std::size_t modes() const noexcept { return means_.shape()[0]; }
    [[nodiscard]] const Tensor& means() const noexcept { return means_; }
    [[nodiscard]] double component_std() const noexcept { return std_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }

    // log p_sigma(x) per row. sigma = 0 with s = 0 is a DomainError.
    [[nodiscard]] Tensor log_density(const Tensor& x, double sigma) const;
    // grad_x log p_sigma(x) per row, via log-sum-exp responsibilities.
    [[nodiscard]] Tensor smoothed_score(const Tensor& x, double sigma) const;
    // Posterior component probabilities per row, [B, m].
    [[nodiscard]] Tensor responsibilities(const Tensor& x, double sigma) const;

    [[nodiscard]] Tensor sample(std::size_t n, Rng& rng) const;
    // Also reports the component each row was drawn from.
    [[nodiscard]] Tensor sample(std::size_t n, Rng& rng, std::vector<std::size_t>& components) const;

private:
    void check(const Tensor& x) const;
    [[nodiscard]] double smoothed_var(double sigma) const;

    Tensor means_;
    double std_;
    std::vector<double> weights_;
    std::vector<double> log_weights_;
};

// E(x) = -log p_sigma(x) for a GmmOracle; the exact energy of the smoothed density.
class GmmEnergy final : public EnergyModel {
public:
    GmmEnergy(const GmmOracle& oracle, double sigma) : oracle_(oracle), sigma_(sigma) {}

    [[nodiscard]] std::size_t dim() const override { return oracle_.dim(); }
    [[nodiscard]] Tensor energy(const Tensor& x) const override;
    [[nodiscard]] Tensor energy_grad(const Tensor& x) const override;

private:
    const GmmOracle& oracle_;
    double sigma_;
};

}  // namespace mdsm
