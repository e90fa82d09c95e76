#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "mdsm/energy_model.hpp"
#include "mdsm/rng.hpp"
#include "mdsm/tensor.hpp"

namespace mdsm {

// log p (up to a constant) and its gradient for a batch of chains.
struct LogDensity {
    Tensor logp;  // [M]
    Tensor grad;  // [M, d]
};
using LogDensityFn = std::function<LogDensity(const Tensor& x)>;

struct PhasePoint {
    Tensor x;  // [M, d]
    Tensor p;  // [M, d]
};

// L leapfrog steps of size eps for H = -log p(x) + |p|^2 / 2.
[[nodiscard]] PhasePoint leapfrog(const LogDensityFn& f, PhasePoint start, double eps, std::size_t steps);

struct HmcResult {
    Tensor x;
    double accept_rate = 0.0;
    std::size_t rejected_nonfinite = 0;
};

// One HMC transition per chain with a Metropolis test. Chains whose proposal
// has a non-finite Hamiltonian are rejected and counted.
[[nodiscard]] HmcResult hmc_step(const LogDensityFn& f, const Tensor& x, double eps, std::size_t leapfrog_steps,
                                 Rng& rng);

enum class BetaSpacing { Linear, Geometric };
[[nodiscard]] BetaSpacing parse_beta_spacing(std::string_view name);
[[nodiscard]] std::string_view beta_spacing_name(BetaSpacing spacing) noexcept;

struct AisConfig {
    std::size_t n_intermediates = 1000;
    std::size_t hmc_steps_per_dist = 1;
    std::size_t leapfrog_steps = 10;
    double leapfrog_eps = 0.1;
    std::size_t n_chains = 100;
    BetaSpacing spacing = BetaSpacing::Linear;
    // Explicit schedule; when empty one is generated from n_intermediates and spacing.
    std::vector<double> beta_schedule;
    double reference_std = 1.0;
    std::size_t bootstrap_resamples = 1000;

    // 10000 intermediate distributions with 10 HMC updates each.
    static AisConfig full();

    // beta_0 = 0 < ... < beta_n = 1.
    [[nodiscard]] std::vector<double> betas() const;
    // Throws ConfigError.
    void validate() const;
};

// n + 1 points from 0 to 1. Geometric spacing places beta_1..beta_n
// log-uniformly on [1e-4, 1].
[[nodiscard]] std::vector<double> make_beta_schedule(std::size_t n, BetaSpacing spacing);

struct AisResult {
    double log_z = 0.0;
    double stderr_log_z = 0.0;
    double ess = 0.0;
    bool low_ess = false;  // effective sample size below 2
    bool reverse = false;
    double log_z_reference = 0.0;
    double accept_rate = 0.0;
    std::size_t rejected_nonfinite = 0;
    std::vector<double> log_weights;
    // Mean over the starting points of -E(x) - log_z (reverse runs only).
    double mean_log_density = 0.0;
};

// Forward AIS along f_beta = exp(-(1-beta) E_ref - beta E) from the reference
// N(0, reference_std^2 I) to the model.
[[nodiscard]] AisResult ais_logz(const EnergyModel& model, const AisConfig& config, Rng& rng);

// Reverse AIS from the given points (one chain per row) back to the reference.
[[nodiscard]] AisResult reverse_ais_logz(const EnergyModel& model, const Tensor& data, const AisConfig& config,
                                         Rng& rng);

// (-log_density / d + log(domain_scale)) / log 2.
[[nodiscard]] double bits_per_dim(double log_density_nats, std::size_t d, double domain_scale);

// log(mean(exp(v))), stable.
[[nodiscard]] double log_mean_exp(std::span<const double> v);

}  // namespace mdsm
