#include "mdsm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mdsm/error.hpp"

namespace mdsm {
namespace {

constexpr const char* kModule = "training";

void check_batch(const Tensor& clean, const Tensor& noisy, const Tensor& sigmas, std::size_t dim) {
    if (clean.rank() != 2 || clean.shape()[1] != dim || clean.shape()[0] == 0) {
        throw DimensionError(kModule, "expected a non-empty [B," + std::to_string(dim) + "] batch, got " +
                                          shape_string(clean.shape()));
    }
    if (noisy.shape() != clean.shape() || sigmas.shape() != Shape{clean.shape()[0]}) {
        throw DimensionError(kModule, "clean, noisy and sigma batches disagree in shape");
    }
}

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Re-evaluates rows one at a time to find which noise level blew up.
[[noreturn]] void report_nonfinite(const EnergyNet& net, const Tensor& clean, const Tensor& noisy,
                                   const Tensor& sigmas, double sigma0, const std::string& cause) {
    const std::size_t d = clean.shape()[1];
    for (std::size_t r = 0; r < clean.shape()[0]; ++r) {
        const Tensor row = Tensor({1, d}, {noisy.row(r).begin(), noisy.row(r).end()});
        bool bad = !row.all_finite();
        if (!bad) {
            try {
                const EnergyAndGrad eg = net.energy_and_grad(row);
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double res = clean.at(r, j) - noisy.at(r, j) + sigma0 * sigma0 * eg.grad[j];
                    acc += res * res;
                }
                bad = !std::isfinite(acc) || !std::isfinite(eg.energy[0]);
            } catch (const NumericError&) {
                bad = true;
            }
        }
        if (bad) {
            throw NumericError(kModule, "non-finite loss at noise level sigma=" + std::to_string(sigmas[r]) +
                                            " (batch row " + std::to_string(r) + "): " + cause);
        }
    }
    throw NumericError(kModule, "non-finite loss: " + cause);
}

}  // namespace

LossTerms record_denoising_loss(ad::Tape& tape, const EnergyNet& net, std::span<const ad::Var> params,
                                const Tensor& clean, const Tensor& noisy, const Tensor& sigmas, double sigma0,
                                Weighting weighting, const Tensor* row_weights) {
    check_batch(clean, noisy, sigmas, net.dim());
    const std::size_t rows = clean.shape()[0];
    Tensor weights({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        weights[r] = level_weight(weighting, sigmas[r]) * (row_weights != nullptr ? (*row_weights)[r] : 1.0);
    }

    const ad::Var xt = tape.variable(noisy);
    const ad::Var x = tape.constant(clean);
    const ad::Var energy = net.energy(params, xt);
    const std::vector<ad::Var> wrt{xt};
    const ad::Var grad_x = tape.grad(ad::sum(energy), wrt, /*create_graph=*/true)[0];
    const ad::Var residual = ad::add(ad::sub(x, xt), ad::scale(grad_x, sigma0 * sigma0));
    const ad::Var residual_sq = ad::sum_axis(ad::square(residual), 1);
    const ad::Var loss = ad::mean(ad::mul(residual_sq, tape.constant(std::move(weights))));
    return {loss, residual_sq};
}

LossValue evaluate_denoising_loss(const EnergyNet& net, const Tensor& clean, const Tensor& noisy,
                                  const Tensor& sigmas, double sigma0, Weighting weighting, bool with_grads,
                                  const Tensor* row_weights) {
    check_batch(clean, noisy, sigmas, net.dim());
    LossValue out;
    try {
        ad::Tape tape;
        const std::vector<ad::Var> params = net.bind(tape, with_grads);
        const LossTerms terms =
            record_denoising_loss(tape, net, params, clean, noisy, sigmas, sigma0, weighting, row_weights);
        out.loss = terms.loss.value().item();
        const Tensor& rsq = terms.residual_sq.value();
        out.mean_sq_residual = 0.0;
        for (double v : rsq.data()) out.mean_sq_residual += v;
        out.mean_sq_residual /= static_cast<double>(rsq.numel());
        if (with_grads) {
            for (const ad::Var& g : tape.grad(terms.loss, params)) out.grads.push_back(g.value());
        }
    } catch (const NumericError& e) {
        report_nonfinite(net, clean, noisy, sigmas, sigma0, e.what());
    }
    return out;
}

LossValue mdsm_loss(const EnergyNet& net, const Tensor& x, const NoiseSchedule& schedule, Rng& rng,
                    Weighting weighting, bool with_grads) {
    PerturbedBatch pb = perturb_batch(x, schedule, rng);
    LossValue v = evaluate_denoising_loss(net, x, pb.noisy, pb.sigmas, schedule.sigma0, weighting, with_grads);
    v.noisy = std::move(pb.noisy);
    v.sigmas = std::move(pb.sigmas);
    return v;
}

LossValue dsm_single_loss(const EnergyNet& net, const Tensor& x, double sigma, double sigma0, Rng& rng,
                          bool with_grads) {
    if (!(sigma > 0.0)) throw DomainError(kModule, "dsm_single_loss needs sigma > 0");
    const NoiseSchedule single = make_schedule(sigma, sigma, 1, Spacing::Linear, sigma0);
    return mdsm_loss(net, x, single, rng, Weighting::None, with_grads);
}

Tensor star_log_weights(const Tensor& dataset, std::span<const std::size_t> batch, const Tensor& noisy,
                        const NoiseSchedule& schedule) {
    const std::size_t n = dataset.shape()[0];
    const std::size_t d = dataset.shape()[1];
    const std::size_t k = schedule.size();
    const double inv_two_var0 = 1.0 / (2.0 * schedule.sigma0 * schedule.sigma0);
    std::vector<double> inv_two_var(k);
    std::vector<double> log_norm(k);
    for (std::size_t l = 0; l < k; ++l) {
        inv_two_var[l] = 1.0 / (2.0 * schedule.levels[l] * schedule.levels[l]);
        log_norm[l] = -static_cast<double>(d) * std::log(schedule.levels[l]);
    }

    Tensor out({batch.size()});
    std::vector<double> dist(n);
    std::vector<double> log_kernel0(n);
    std::vector<double> log_mixture(n);
    std::vector<double> per_level(k);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = noisy.at(r, c) - dataset.at(j, c);
                acc += diff * diff;
            }
            dist[j] = acc;
            log_kernel0[j] = -acc * inv_two_var0;
            for (std::size_t l = 0; l < k; ++l) per_level[l] = log_norm[l] - acc * inv_two_var[l];
            log_mixture[j] = log_sum_exp(per_level);
        }
        const std::size_t i = batch[r];
        const double post0 = log_kernel0[i] - log_sum_exp(log_kernel0);
        const double post_m = log_mixture[i] - log_sum_exp(log_mixture);
        out[r] = post0 - post_m;
    }
    return out;
}

StarLossValue mdsm_star_loss(const EnergyNet& net, const Tensor& dataset, std::span<const std::size_t> batch,
                             const NoiseSchedule& schedule, Rng& rng, Weighting weighting, bool with_grads,
                             bool force_unit_weights) {
    if (dataset.rank() != 2 || dataset.shape()[1] != net.dim() || dataset.shape()[0] == 0) {
        throw DimensionError(kModule, "dataset must be a non-empty [N," + std::to_string(net.dim()) + "] tensor");
    }
    const std::size_t n = dataset.shape()[0];
    if (n > kMaxStarDatasetSize) {
        throw CapacityError(kModule, "exact posteriors need N <= " + std::to_string(kMaxStarDatasetSize) +
                                         ", got " + std::to_string(n));
    }
    if (batch.empty()) throw DimensionError(kModule, "empty batch");
    const std::size_t d = dataset.shape()[1];
    Tensor clean({batch.size(), d});
    for (std::size_t r = 0; r < batch.size(); ++r) {
        if (batch[r] >= n) throw DimensionError(kModule, "batch index out of range");
        std::copy_n(dataset.row(batch[r]).begin(), d, clean.row(r).begin());
    }
    PerturbedBatch pb = perturb_batch(clean, schedule, rng);

    StarLossValue out;
    const Tensor log_w = star_log_weights(dataset, batch, pb.noisy, schedule);
    out.weights = Tensor(log_w.shape());
    for (std::size_t r = 0; r < log_w.numel(); ++r) out.weights[r] = std::exp(log_w[r]);
    std::vector<double> sorted(out.weights.data().begin(), out.weights.data().end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    out.stats.min = sorted.front();
    out.stats.max = sorted.back();
    out.stats.median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);

    out.value = evaluate_denoising_loss(net, clean, pb.noisy, pb.sigmas, schedule.sigma0, weighting, with_grads,
                                        force_unit_weights ? nullptr : &out.weights);
    out.value.noisy = std::move(pb.noisy);
    out.value.sigmas = std::move(pb.sigmas);
    return out;
}

void adam_step(EnergyNet& net, std::span<const Tensor> grads, AdamState& state, const AdamHyper& hyper) {
    adam_update(net.mutable_params(), grads, state, hyper);
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError(kModule, "batch_size must be >= 1");
    if (!(adam.learning_rate > 0.0)) throw ConfigError(kModule, "learning_rate must be positive");
    if (steps < 1) throw ConfigError(kModule, "steps must be >= 1");
    if (schedule.levels.empty()) throw ConfigError(kModule, "empty noise schedule");
}

TrainResult train(const Tensor& dataset, EnergyNet& net, const TrainConfig& config, const CheckpointFn& on_checkpoint) {
    config.validate();
    if (dataset.rank() != 2 || dataset.shape()[0] == 0 || dataset.shape()[1] != net.dim()) {
        throw DimensionError(kModule, "dataset must be a non-empty [N," + std::to_string(net.dim()) + "] tensor, got " +
                                          shape_string(dataset.shape()));
    }
    const std::size_t n = dataset.shape()[0];
    const std::size_t d = dataset.shape()[1];
    Rng rng(config.seed);
    TrainResult result;
    result.adam = AdamState::zeros_like(net.params());
    result.history.reserve(config.steps);
    Tensor batch({config.batch_size, d});
    for (std::size_t step = 1; step <= config.steps; ++step) {
        for (std::size_t r = 0; r < config.batch_size; ++r) {
            const std::size_t idx = rng.index(n);
            std::copy_n(dataset.row(idx).begin(), d, batch.row(r).begin());
        }
        LossValue v;
        try {
            v = mdsm_loss(net, batch, config.schedule, rng, config.weighting, true);
        } catch (const NumericError& e) {
            throw NumericError(kModule, "step " + std::to_string(step) + ": " + e.what());
        }
        adam_step(net, v.grads, result.adam, config.adam);
        result.history.push_back({step, v.loss, v.mean_sq_residual});
        if (on_checkpoint && config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
            on_checkpoint(step, net);
        }
    }
    return result;
}

}  // namespace mdsm
