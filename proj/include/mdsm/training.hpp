#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mdsm/adam.hpp"
#include "mdsm/energy_net.hpp"
#include "mdsm/noise.hpp"
#include "mdsm/rng.hpp"
#include "mdsm/tape.hpp"

namespace mdsm {

// Denoising objective on a tape:
//
//   loss = mean_i  w_i * l(sigma_i) * || x_i - xt_i + sigma0^2 grad_xt E(xt_i) ||^2
//
// grad_xt E is recorded with create_graph, so the loss can be differentiated
// with respect to the bound network parameters. row_weights (w_i) is optional.
struct LossTerms {
    ad::Var loss;         // []
    ad::Var residual_sq;  // [B], unweighted ||residual||^2
};

LossTerms record_denoising_loss(ad::Tape& tape, const EnergyNet& net, std::span<const ad::Var> params,
                                const Tensor& clean, const Tensor& noisy, const Tensor& sigmas, double sigma0,
                                Weighting weighting, const Tensor* row_weights = nullptr);

struct LossValue {
    double loss = 0.0;
    double mean_sq_residual = 0.0;
    std::vector<Tensor> grads;  // d loss / d params, empty unless requested
    Tensor noisy;
    Tensor sigmas;
};

// Evaluates the denoising loss for fixed corruption. Throws NumericError naming
// the first noise level whose row produces a non-finite value.
LossValue evaluate_denoising_loss(const EnergyNet& net, const Tensor& clean, const Tensor& noisy,
                                  const Tensor& sigmas, double sigma0, Weighting weighting, bool with_grads,
                                  const Tensor* row_weights = nullptr);

// Multiscale denoising score matching: corrupts x with perturb_batch and
// evaluates the weighted objective against the sigma0 kernel.
LossValue mdsm_loss(const EnergyNet& net, const Tensor& x, const NoiseSchedule& schedule, Rng& rng,
                    Weighting weighting = Weighting::InverseVariance, bool with_grads = true);

// Single-level denoising score matching (one noise level, no weighting).
LossValue dsm_single_loss(const EnergyNet& net, const Tensor& x, double sigma, double sigma0, Rng& rng,
                          bool with_grads = true);

struct WeightStats {
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
};

struct StarLossValue {
    LossValue value;
    Tensor weights;  // [B]
    WeightStats stats;
};

inline constexpr std::size_t kMaxStarDatasetSize = 4096;

// Importance-weighted objective: each corrupted row is weighted by
// q_sigma0(x|xt) / q_M(x|xt), both posteriors computed exactly over the
// dataset by Bayes rule with a uniform prior on its rows and a uniform choice
// over noise levels for q_M. batch holds dataset row indices. With
// force_unit_weights the weights are reported but not applied.
// Throws CapacityError when the dataset has more than kMaxStarDatasetSize rows.
StarLossValue mdsm_star_loss(const EnergyNet& net, const Tensor& dataset, std::span<const std::size_t> batch,
                             const NoiseSchedule& schedule, Rng& rng, Weighting weighting = Weighting::None,
                             bool with_grads = false, bool force_unit_weights = false);

// Log importance weights log q_sigma0(x_i|xt) - log q_M(x_i|xt) for rows
// generated from dataset[batch[r]].
Tensor star_log_weights(const Tensor& dataset, std::span<const std::size_t> batch, const Tensor& noisy,
                        const NoiseSchedule& schedule);

void adam_step(EnergyNet& net, std::span<const Tensor> grads, AdamState& state, const AdamHyper& hyper);

struct TrainConfig {
    NoiseSchedule schedule = make_schedule(0.05, 1.2, 128, Spacing::Linear, 0.1);
    Weighting weighting = Weighting::InverseVariance;
    std::size_t batch_size = 128;
    AdamHyper adam{};
    std::size_t steps = 1;
    std::size_t checkpoint_every = 5000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct StepRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double mean_sq_residual = 0.0;
};

struct TrainResult {
    std::vector<StepRecord> history;
    AdamState adam;
};

using CheckpointFn = std::function<void(std::size_t step, const EnergyNet& net)>;

// Runs config.steps iterations of batch -> mdsm loss -> gradient -> Adam.
// Batches are drawn uniformly with replacement from the dataset rows. The
// callback fires every checkpoint_every steps. Throws NumericError with the
// step index and noise level when the loss becomes non-finite.
TrainResult train(const Tensor& dataset, EnergyNet& net, const TrainConfig& config,
                  const CheckpointFn& on_checkpoint = {});

}  // namespace mdsm
