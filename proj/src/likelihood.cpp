#include "mdsm/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mdsm/error.hpp"

namespace mdsm {

namespace {

constexpr const char* kModule = "likelihood";

void check_finite_config(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(kModule, std::string(what) + " must be positive");
}

// Annealed density f_beta with the reference folded in.
LogDensityFn path_density(const EnergyModel& model, const EnergyModel& reference, double beta) {
    return [&model, &reference, beta](const Tensor& x) {
        const EnergyAndGrad m = model.energy_and_grad(x);
        const EnergyAndGrad r = reference.energy_and_grad(x);
        const double a = 1.0 - beta;
        LogDensity out{Tensor(m.energy.shape()), Tensor(x.shape())};
        for (std::size_t i = 0; i < out.logp.numel(); ++i) out.logp[i] = -(a * r.energy[i] + beta * m.energy[i]);
        for (std::size_t i = 0; i < out.grad.numel(); ++i) out.grad[i] = -(a * r.grad[i] + beta * m.grad[i]);
        return out;
    };
}

double bootstrap_stderr(std::span<const double> w, std::size_t resamples, Rng& rng) {
    if (w.size() < 2 || resamples < 2) return 0.0;
    std::vector<double> draw(w.size());
    std::vector<double> stats;
    stats.reserve(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
        for (double& v : draw) v = w[rng.index(w.size())];
        stats.push_back(log_mean_exp(draw));
    }
    double mean = 0.0;
    for (double s : stats) mean += s;
    mean /= static_cast<double>(stats.size());
    double var = 0.0;
    for (double s : stats) var += (s - mean) * (s - mean);
    return std::sqrt(var / static_cast<double>(stats.size() - 1));
}

double effective_sample_size(std::span<const double> w) {
    const double top = *std::max_element(w.begin(), w.end());
    double s1 = 0.0, s2 = 0.0;
    for (double v : w) {
        const double e = std::exp(v - top);
        s1 += e;
        s2 += e * e;
    }
    return s1 * s1 / s2;
}

struct Transition {
    double accepted = 0.0;
    std::size_t proposals = 0;
    std::size_t rejected_nonfinite = 0;
};

void transition(const EnergyModel& model, const EnergyModel& reference, double beta, Tensor& x,
                const AisConfig& config, Rng& rng, Transition& stats) {
    const LogDensityFn f = path_density(model, reference, beta);
    for (std::size_t h = 0; h < config.hmc_steps_per_dist; ++h) {
        HmcResult r = hmc_step(f, x, config.leapfrog_eps, config.leapfrog_steps, rng);
        stats.accepted += r.accept_rate * static_cast<double>(x.shape()[0]);
        stats.proposals += x.shape()[0];
        stats.rejected_nonfinite += r.rejected_nonfinite;
        x = std::move(r.x);
    }
}

AisResult finish(std::vector<double> w, double log_z_ref, bool reverse, const Transition& stats,
                 const AisConfig& config, Rng& rng) {
    AisResult out;
    out.reverse = reverse;
    out.log_z_reference = log_z_ref;
    const double lme = log_mean_exp(w);
    out.log_z = reverse ? log_z_ref - lme : log_z_ref + lme;
    out.stderr_log_z = bootstrap_stderr(w, config.bootstrap_resamples, rng);
    out.ess = effective_sample_size(w);
    out.low_ess = out.ess < 2.0;
    out.accept_rate = stats.proposals ? stats.accepted / static_cast<double>(stats.proposals) : 1.0;
    out.rejected_nonfinite = stats.rejected_nonfinite;
    out.log_weights = std::move(w);
    return out;
}

}  // namespace

PhasePoint leapfrog(const LogDensityFn& f, PhasePoint s, double eps, std::size_t steps) {
    LogDensity cur = f(s.x);
    const std::size_t n = s.x.numel();
    for (std::size_t l = 0; l < steps; ++l) {
        for (std::size_t i = 0; i < n; ++i) s.p[i] += 0.5 * eps * cur.grad[i];
        for (std::size_t i = 0; i < n; ++i) s.x[i] += eps * s.p[i];
        cur = f(s.x);
        for (std::size_t i = 0; i < n; ++i) s.p[i] += 0.5 * eps * cur.grad[i];
    }
    return s;
}

HmcResult hmc_step(const LogDensityFn& f, const Tensor& x, double eps, std::size_t leapfrog_steps, Rng& rng) {
    if (!(eps > 0.0)) throw DomainError(kModule, "leapfrog step size must be positive");
    if (leapfrog_steps < 1) throw DomainError(kModule, "need at least one leapfrog step");
    if (x.rank() != 2 || x.shape()[0] == 0) throw DimensionError(kModule, "HMC needs a non-empty [M,d] batch");
    const std::size_t m = x.shape()[0];
    const std::size_t d = x.shape()[1];

    PhasePoint start{x, Tensor(x.shape())};
    rng.fill_normal(start.p.data());
    const LogDensity before = f(x);

    // Proposals evaluated as one batch; if that fails numerically each chain is
    // retried alone so only the offending chains are rejected.
    std::vector<bool> valid(m, true);
    PhasePoint end{Tensor(x.shape()), Tensor(x.shape())};
    Tensor logp_end({m});
    try {
        end = leapfrog(f, start, eps, leapfrog_steps);
        logp_end = f(end.x).logp;
    } catch (const NumericError&) {
        for (std::size_t r = 0; r < m; ++r) {
            PhasePoint one{Tensor({1, d}), Tensor({1, d})};
            std::copy_n(start.x.row(r).begin(), d, one.x.row(0).begin());
            std::copy_n(start.p.row(r).begin(), d, one.p.row(0).begin());
            try {
                PhasePoint moved = leapfrog(f, one, eps, leapfrog_steps);
                logp_end[r] = f(moved.x).logp[0];
                std::copy_n(moved.x.row(0).begin(), d, end.x.row(r).begin());
                std::copy_n(moved.p.row(0).begin(), d, end.p.row(r).begin());
            } catch (const NumericError&) {
                valid[r] = false;
            }
        }
    }

    HmcResult out{x, 0.0, 0};
    std::size_t accepted = 0;
    for (std::size_t r = 0; r < m; ++r) {
        const double u = rng.uniform();
        if (!valid[r]) {
            ++out.rejected_nonfinite;
            continue;
        }
        double k0 = 0.0, k1 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            k0 += start.p.at(r, j) * start.p.at(r, j);
            k1 += end.p.at(r, j) * end.p.at(r, j);
        }
        const double h0 = -before.logp[r] + 0.5 * k0;
        const double h1 = -logp_end[r] + 0.5 * k1;
        bool finite = std::isfinite(h1);
        for (std::size_t j = 0; j < d && finite; ++j) finite = std::isfinite(end.x.at(r, j));
        if (!finite) {
            ++out.rejected_nonfinite;
            continue;
        }
        if (std::log(u) < h0 - h1) {
            std::copy_n(end.x.row(r).begin(), d, out.x.row(r).begin());
            ++accepted;
        }
    }
    out.accept_rate = static_cast<double>(accepted) / static_cast<double>(m);
    return out;
}

BetaSpacing parse_beta_spacing(std::string_view name) {
    if (name == "linear") return BetaSpacing::Linear;
    if (name == "geometric") return BetaSpacing::Geometric;
    throw ConfigError(kModule, "unknown beta spacing '" + std::string(name) + "'");
}

std::string_view beta_spacing_name(BetaSpacing spacing) noexcept {
    return spacing == BetaSpacing::Linear ? "linear" : "geometric";
}

std::vector<double> make_beta_schedule(std::size_t n, BetaSpacing spacing) {
    if (n < 1) throw ConfigError(kModule, "need at least one intermediate distribution");
    std::vector<double> b(n + 1);
    b[0] = 0.0;
    if (spacing == BetaSpacing::Linear || n == 1) {
        for (std::size_t k = 1; k <= n; ++k) b[k] = static_cast<double>(k) / static_cast<double>(n);
    } else {
        const double lo = std::log(1e-4);
        for (std::size_t k = 1; k <= n; ++k) {
            b[k] = std::exp(lo * (1.0 - static_cast<double>(k - 1) / static_cast<double>(n - 1)));
        }
    }
    b[n] = 1.0;
    return b;
}

AisConfig AisConfig::full() {
    AisConfig c;
    c.n_intermediates = 10000;
    c.hmc_steps_per_dist = 10;
    return c;
}

std::vector<double> AisConfig::betas() const {
    return beta_schedule.empty() ? make_beta_schedule(n_intermediates, spacing) : beta_schedule;
}

void AisConfig::validate() const {
    if (n_intermediates < 1) throw ConfigError(kModule, "n_intermediates must be >= 1");
    if (hmc_steps_per_dist < 1) throw ConfigError(kModule, "hmc_steps_per_dist must be >= 1");
    if (leapfrog_steps < 1) throw ConfigError(kModule, "leapfrog_steps must be >= 1");
    if (n_chains < 1) throw ConfigError(kModule, "n_chains must be >= 1");
    check_finite_config(leapfrog_eps, "leapfrog_eps");
    check_finite_config(reference_std, "reference_std");
    if (!beta_schedule.empty()) {
        if (beta_schedule.size() < 2 || beta_schedule.front() != 0.0 || beta_schedule.back() != 1.0) {
            throw ConfigError(kModule, "beta schedule must run from 0 to 1");
        }
        for (std::size_t k = 1; k < beta_schedule.size(); ++k) {
            if (!(beta_schedule[k] > beta_schedule[k - 1])) {
                throw ConfigError(kModule, "beta schedule must be strictly increasing");
            }
        }
    }
}

AisResult ais_logz(const EnergyModel& model, const AisConfig& config, Rng& rng) {
    config.validate();
    const std::size_t d = model.dim();
    const QuadraticEnergy reference = QuadraticEnergy::isotropic(d, config.reference_std);
    const std::vector<double> betas = config.betas();

    Tensor x({config.n_chains, d});
    rng.fill_normal(x.data(), 0.0, config.reference_std);
    std::vector<double> w(config.n_chains, 0.0);
    Transition stats;
    for (std::size_t k = 0; k + 1 < betas.size(); ++k) {
        const Tensor e = model.energy(x);
        const Tensor e_ref = reference.energy(x);
        const double db = betas[k + 1] - betas[k];
        for (std::size_t c = 0; c < w.size(); ++c) w[c] += db * (e_ref[c] - e[c]);
        if (k + 2 < betas.size()) transition(model, reference, betas[k + 1], x, config, rng, stats);
    }
    for (double v : w) {
        if (!std::isfinite(v)) throw NumericError(kModule, "non-finite AIS log-weight");
    }
    return finish(std::move(w), reference.log_partition(), false, stats, config, rng);
}

AisResult reverse_ais_logz(const EnergyModel& model, const Tensor& data, const AisConfig& config, Rng& rng) {
    config.validate();
    const std::size_t d = model.dim();
    if (data.rank() != 2 || data.shape()[1] != d || data.shape()[0] == 0) {
        throw DimensionError(kModule, "reverse AIS needs starting points [M," + std::to_string(d) + "], got " +
                                          shape_string(data.shape()));
    }
    const QuadraticEnergy reference = QuadraticEnergy::isotropic(d, config.reference_std);
    const std::vector<double> betas = config.betas();

    Tensor x = data;
    std::vector<double> w(data.shape()[0], 0.0);
    Transition stats;
    for (std::size_t k = betas.size() - 1; k >= 1; --k) {
        const Tensor e = model.energy(x);
        const Tensor e_ref = reference.energy(x);
        const double db = betas[k] - betas[k - 1];
        for (std::size_t c = 0; c < w.size(); ++c) w[c] += db * (e[c] - e_ref[c]);
        if (k > 1) transition(model, reference, betas[k - 1], x, config, rng, stats);
    }
    for (double v : w) {
        if (!std::isfinite(v)) throw NumericError(kModule, "non-finite AIS log-weight");
    }
    AisResult out = finish(std::move(w), reference.log_partition(), true, stats, config, rng);
    const Tensor e0 = model.energy(data);
    double total = 0.0;
    for (double e : e0.data()) total += -e - out.log_z;
    out.mean_log_density = total / static_cast<double>(e0.numel());
    return out;
}

double bits_per_dim(double log_density_nats, std::size_t d, double domain_scale) {
    if (d < 1) throw DomainError(kModule, "dimension must be >= 1");
    if (!(domain_scale > 0.0)) throw DomainError(kModule, "domain scale must be positive");
    return (-log_density_nats / static_cast<double>(d) + std::log(domain_scale)) / std::numbers::ln2;
}

double log_mean_exp(std::span<const double> v) {
    if (v.empty()) throw DomainError(kModule, "log-mean-exp of an empty set");
    const double top = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(top)) return top;
    double total = 0.0;
    for (double x : v) total += std::exp(x - top);
    return top + std::log(total / static_cast<double>(v.size()));
}

}  // namespace mdsm
