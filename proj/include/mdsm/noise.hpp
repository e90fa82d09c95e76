#pragma once

#include <string_view>
#include <vector>

#include "mdsm/rng.hpp"
#include "mdsm/tensor.hpp"

namespace mdsm {

enum class Spacing { Linear, Geometric };

[[nodiscard]] Spacing parse_spacing(std::string_view name);
[[nodiscard]] std::string_view spacing_name(Spacing spacing) noexcept;

// Fixed noise levels sigma_1 <= ... <= sigma_K used to corrupt training data,
// plus the kernel width sigma0 of the single smoothed density being learned.
struct NoiseSchedule {
    std::vector<double> levels;
    Spacing spacing = Spacing::Linear;
    double sigma0 = 0.1;

    [[nodiscard]] std::size_t size() const noexcept { return levels.size(); }
    [[nodiscard]] double min() const { return levels.front(); }
    [[nodiscard]] double max() const { return levels.back(); }
};

// K = 1 yields the single level `min` (the single-noise regime).
// Throws ConfigError when min <= 0, min > max, K == 0 or sigma0 <= 0.
[[nodiscard]] NoiseSchedule make_schedule(double min, double max, std::size_t k, Spacing spacing, double sigma0);

struct PerturbedBatch {
    Tensor noisy;   // [B, d]
    Tensor sigmas;  // [B]
};

// Row i gets sigma = levels[i mod K] and noisy_i = x_i + sigma * N(0, I).
[[nodiscard]] PerturbedBatch perturb_batch(const Tensor& x, const NoiseSchedule& schedule, Rng& rng);

// Per-level loss weighting l(sigma).
enum class Weighting { InverseVariance, None };

// l(sigma) = 1 / sigma^2. Throws DomainError for sigma <= 0.
[[nodiscard]] double weight(double sigma);
[[nodiscard]] double level_weight(Weighting weighting, double sigma);

}  // namespace mdsm
