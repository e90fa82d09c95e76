#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mdsm/energy_model.hpp"
#include "mdsm/gmm_oracle.hpp"
#include "mdsm/rng.hpp"
#include "mdsm/tensor.hpp"

namespace mdsm {

// Thin shell of radius sqrt(d) sigma and half-width epsilon around a point.
struct ShellSpec {
    std::size_t d = 1;
    double sigma = 1.0;
    double epsilon = 0.0;

    void validate() const;  // Throws ConfigError.
    [[nodiscard]] double radius() const;
};

struct ConcentrationStats {
    double mean_norm = 0.0;
    double cv = 0.0;            // std(norm) / mean(norm)
    double mean_abs_cos = 0.0;  // against a fixed random unit vector
    double shell_fraction = 0.0;  // share of norms within radius +- epsilon
};

// Draws n vectors from N(0, sigma^2 I_d). Throws ConfigError for n < 100.
[[nodiscard]] ConcentrationStats concentration_stats(const ShellSpec& spec, std::size_t n, Rng& rng);

struct ShellError {
    double radius = 0.0;     // r
    double sigma_eff = 0.0;  // r * sigma_eval
    double error = 0.0;      // mean |s_model - s_oracle|^2 / mean |s_oracle|^2
    double mse = 0.0;        // mean |s_model - s_oracle|^2
    double mean_cos = 0.0;
};

// For each r, displaces n oracle samples by r sqrt(d) sigma_eval along random
// directions, so the points look like draws corrupted at sigma_eff = r sigma_eval.
// The model's score estimate at that noise level is -(sigma0/sigma_eff)^2 grad E,
// the rescaling a sigma0-kernel energy implies; it is compared with the
// oracle's score smoothed at sigma_eff.
[[nodiscard]] std::vector<ShellError> shell_score_error(const EnergyModel& model, const GmmOracle& oracle,
                                                        std::span<const double> radii, double sigma_eval,
                                                        double sigma0, std::size_t n, Rng& rng);

// Mean cosine between -grad E and the oracle score smoothed at sigma0, over
// noisy points x + sigma N(0, I) with x from the oracle, averaged over levels.
struct ScoreAgreement {
    double mean_cos = 0.0;
    std::vector<double> per_level_cos;
};
[[nodiscard]] ScoreAgreement score_agreement(const EnergyModel& model, const GmmOracle& oracle,
                                             std::span<const double> levels, double sigma0,
                                             std::size_t per_level, Rng& rng);

struct ModeCoverage {
    std::vector<std::size_t> counts;  // per mode
    std::size_t unassigned = 0;
    std::size_t n_covered = 0;
    double min_share = 0.0;  // smallest mode count over the number of samples
};

// 3 sqrt(s^2 + sigma0^2) sqrt(d).
[[nodiscard]] double default_mode_threshold(const GmmOracle& oracle, double sigma0);

// Assigns each sample to its nearest mean if within threshold. Throws
// DomainError for threshold <= 0.
[[nodiscard]] ModeCoverage mode_coverage(const Tensor& samples, const GmmOracle& oracle, double threshold);

struct NeighborResult {
    std::vector<std::vector<std::size_t>> indices;  // [M][k], nearest first
    std::vector<std::vector<double>> distances;
};

// Exact k nearest neighbours in L2 by brute force; ties broken by index.
// Throws ConfigError when k is 0 or exceeds the dataset size.
[[nodiscard]] NeighborResult nn_check(const Tensor& samples, const Tensor& dataset, std::size_t k);

// Mean over n_noise draws of E(x + sigma0 N(0, I)) per row.
[[nodiscard]] Tensor ood_energy_score(const EnergyModel& model, const Tensor& x, double sigma0, Rng& rng,
                                      std::size_t n_noise = 16);

[[nodiscard]] double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace mdsm
