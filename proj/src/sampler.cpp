#include "mdsm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mdsm/error.hpp"

namespace mdsm {

namespace {

constexpr const char* kModule = "sampler";

void check_batch(const EnergyModel& model, const Tensor& x) {
    if (x.rank() != 2 || x.shape()[1] != model.dim()) {
        throw DimensionError(kModule, "expected points [M," + std::to_string(model.dim()) + "], got " +
                                          shape_string(x.shape()));
    }
}

TraceRow trace_row(std::size_t step, double temperature, const Tensor& energy) {
    const double n = static_cast<double>(energy.numel());
    double mean = 0.0;
    for (double e : energy.data()) mean += e;
    mean /= n;
    double var = 0.0;
    for (double e : energy.data()) var += (e - mean) * (e - mean);
    return {step, temperature, mean, std::sqrt(var / n)};
}

Tensor step_from(const Tensor& x, const Tensor& grad, double temperature, double eps, Rng& rng) {
    const double drift = eps * eps * 0.5;
    const double diffusion = eps * std::sqrt(temperature);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] - drift * grad[i] + diffusion * rng.normal();
    if (!out.all_finite()) {
        throw NumericError(kModule, "non-finite Langevin proposal at T=" + std::to_string(temperature) +
                                        ", eps=" + std::to_string(eps));
    }
    return out;
}

Tensor initial_points(std::size_t m, std::size_t d, const AnnealSchedule& schedule, const SampleOptions& options,
                      Rng& rng) {
    Tensor x({m, d});
    const double spread = std::sqrt(schedule.temperatures.front()) * options.sigma0;
    for (double& v : x.data()) v = options.init_center + spread * rng.normal();
    return x;
}

void check_options(const SampleOptions& options) {
    if (!(options.sigma0 > 0.0)) throw ConfigError(kModule, "sigma0 must be positive");
}

// Shared annealing loop; clamp (may be empty) runs before every step and once
// more before the final jump.
template <typename Clamp>
SampleResult anneal(const EnergyModel& model, Tensor x, const AnnealSchedule& schedule, Rng& rng,
                    const SampleOptions& options, Clamp&& clamp) {
    SampleResult result;
    if (options.trace) result.trace.reserve(schedule.size());
    for (std::size_t t = 0; t < schedule.size(); ++t) {
        const double temperature = schedule.temperatures[t];
        clamp(x, temperature);
        Tensor grad;
        if (options.trace) {
            EnergyAndGrad eg = model.energy_and_grad(x);
            result.trace.push_back(trace_row(t + 1, temperature, eg.energy));
            grad = std::move(eg.grad);
        } else {
            grad = model.energy_grad(x);
        }
        try {
            x = step_from(x, grad, temperature, schedule.step_size, rng);
        } catch (const NumericError& e) {
            throw NumericError(kModule, "step " + std::to_string(t + 1) + ": " + e.what());
        }
    }
    clamp(x, schedule.temperatures.back());
    result.annealed = x;
    result.samples = options.final_jump ? denoise_jump(model, x, options.sigma0) : std::move(x);
    return result;
}

}  // namespace

void AnnealSchedule::validate() const {
    if (temperatures.empty()) throw ConfigError(kModule, "anneal schedule has no steps");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError(kModule, "step size must be positive");
    for (double t : temperatures) {
        if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError(kModule, "temperatures must be positive and finite");
    }
}

std::size_t anneal_decay_steps(std::size_t n_steps) noexcept {
    if (n_steps <= 1) return n_steps;
    const std::size_t plateau = n_steps / 10;
    return n_steps - plateau;
}

AnnealSchedule default_anneal(std::size_t n_steps, double t_start, double t_end, double step_size) {
    if (n_steps < 1) throw ConfigError(kModule, "anneal needs at least one step");
    if (!(t_end > 0.0) || !(t_start >= t_end) || !std::isfinite(t_start)) {
        throw ConfigError(kModule, "need t_start >= t_end > 0");
    }
    AnnealSchedule s;
    s.step_size = step_size;
    s.temperatures.assign(n_steps, t_end);
    const std::size_t decay = anneal_decay_steps(n_steps);
    if (decay == 1) {
        s.temperatures[0] = t_start;
    } else {
        const double lo = std::log(t_end);
        const double hi = std::log(t_start);
        const double last = static_cast<double>(decay - 1);
        for (std::size_t i = 0; i < decay; ++i) {
            s.temperatures[i] = std::exp(hi + (lo - hi) * (static_cast<double>(i) / last));
        }
        s.temperatures[0] = t_start;
        s.temperatures[decay - 1] = t_end;
    }
    s.validate();
    return s;
}

Tensor langevin_step(const EnergyModel& model, const Tensor& x, double temperature, double eps, Rng& rng) {
    check_batch(model, x);
    if (!(temperature > 0.0)) throw DomainError(kModule, "temperature must be positive");
    if (!(eps > 0.0)) throw DomainError(kModule, "step size must be positive");
    return step_from(x, model.energy_grad(x), temperature, eps, rng);
}

Tensor denoise_jump(const EnergyModel& model, const Tensor& x, double sigma0) {
    check_batch(model, x);
    if (!(sigma0 > 0.0)) throw DomainError(kModule, "sigma0 must be positive");
    const Tensor grad = model.energy_grad(x);
    const double s2 = sigma0 * sigma0;
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] - s2 * grad[i];
    if (!out.all_finite()) throw NumericError(kModule, "non-finite denoising jump");
    return out;
}

SampleResult sample(const EnergyModel& model, std::size_t m, const AnnealSchedule& schedule, Rng& rng,
                    const SampleOptions& options) {
    if (m < 1) throw ConfigError(kModule, "need at least one chain");
    schedule.validate();
    check_options(options);
    Tensor x = initial_points(m, model.dim(), schedule, options, rng);
    return anneal(model, std::move(x), schedule, rng, options, [](Tensor&, double) {});
}

SampleResult inpaint(const EnergyModel& model, const Tensor& known, const std::vector<bool>& mask,
                     const AnnealSchedule& schedule, Rng& rng, const SampleOptions& options) {
    check_batch(model, known);
    const std::size_t d = model.dim();
    if (mask.size() != d) {
        throw DimensionError(kModule, "mask has " + std::to_string(mask.size()) + " entries, data has " +
                                          std::to_string(d) + " dimensions");
    }
    if (std::all_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
        throw ConfigError(kModule, "inpainting mask leaves no free coordinate");
    }
    const std::size_t m = known.shape()[0];
    if (m < 1) throw ConfigError(kModule, "need at least one chain");
    schedule.validate();
    check_options(options);

    Tensor x = initial_points(m, d, schedule, options, rng);
    const double sigma0 = options.sigma0;
    auto clamp = [&](Tensor& pts, double temperature) {
        const double spread = std::sqrt(temperature) * sigma0;
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < d; ++j)
                if (mask[j]) pts.at(r, j) = known.at(r, j) + spread * rng.normal();
    };
    SampleResult result = anneal(model, std::move(x), schedule, rng, options, clamp);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < d; ++j)
            if (mask[j]) result.samples.at(r, j) = known.at(r, j);
    return result;
}

}  // namespace mdsm
