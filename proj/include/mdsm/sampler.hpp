#pragma once

#include <cstddef>
#include <vector>

#include "mdsm/energy_model.hpp"
#include "mdsm/rng.hpp"
#include "mdsm/tensor.hpp"

namespace mdsm {

// Per-step temperatures for annealed Langevin dynamics and the step size eps.
struct AnnealSchedule {
    std::vector<double> temperatures;
    double step_size = 0.02;

    [[nodiscard]] std::size_t size() const noexcept { return temperatures.size(); }
    // Throws ConfigError.
    void validate() const;
};

// Geometric decay from t_start to t_end over the first 90% of the steps,
// then a plateau at t_end. n_steps = 1 gives the single temperature t_start.
[[nodiscard]] AnnealSchedule default_anneal(std::size_t n_steps = 2700, double t_start = 100.0,
                                            double t_end = 0.25, double step_size = 0.02);

// Number of steps in the decaying part of a default_anneal schedule.
[[nodiscard]] std::size_t anneal_decay_steps(std::size_t n_steps) noexcept;

// x' = x - (eps^2/2) grad E(x) + eps sqrt(T) N(0, I). Throws NumericError if
// the proposal is not finite.
[[nodiscard]] Tensor langevin_step(const EnergyModel& model, const Tensor& x, double temperature, double eps,
                                   Rng& rng);

// x - sigma0^2 grad E(x).
[[nodiscard]] Tensor denoise_jump(const EnergyModel& model, const Tensor& x, double sigma0);

struct TraceRow {
    std::size_t step = 0;
    double temperature = 0.0;
    double mean_energy = 0.0;  // over chains, at the point the step starts from
    double std_energy = 0.0;
};

struct SampleOptions {
    double sigma0 = 0.1;
    double init_center = 0.5;  // chains start at N(init_center, T_1 sigma0^2 I)
    bool trace = false;
    bool final_jump = true;
};

struct SampleResult {
    Tensor samples;    // after the final denoising jump when enabled
    Tensor annealed;   // last Langevin state
    std::vector<TraceRow> trace;
};

[[nodiscard]] SampleResult sample(const EnergyModel& model, std::size_t m, const AnnealSchedule& schedule, Rng& rng,
                                  const SampleOptions& options = {});

// Inpainting by clamping. mask[j] marks coordinate j as known. Before each step
// the known coordinates are reset to known + sqrt(T) sigma0 N(0,1); the rest
// follow Langevin dynamics. After the final jump the known coordinates are set
// back to their exact values. An all-false mask reproduces sample() exactly.
// Throws ConfigError for an all-true mask and DimensionError on shape mismatch.
[[nodiscard]] SampleResult inpaint(const EnergyModel& model, const Tensor& known, const std::vector<bool>& mask,
                                   const AnnealSchedule& schedule, Rng& rng, const SampleOptions& options = {});

}  // namespace mdsm
