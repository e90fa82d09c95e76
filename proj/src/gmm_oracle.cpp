#include "mdsm/gmm_oracle.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mdsm/error.hpp"

namespace mdsm {

namespace {
constexpr const char* kModule = "analysis";
}

GmmOracle::GmmOracle(Tensor means, double component_std, std::vector<double> weights)
    : means_(std::move(means)), std_(component_std), weights_(std::move(weights)) {
    if (means_.rank() != 2 || means_.shape()[0] == 0 || means_.shape()[1] == 0) {
        throw DimensionError(kModule, "mixture means must be a non-empty [m,d] tensor");
    }
    if (weights_.size() != means_.shape()[0]) {
        throw DimensionError(kModule, "mixture has " + std::to_string(means_.shape()[0]) + " means but " +
                                          std::to_string(weights_.size()) + " weights");
    }
    if (!(std_ >= 0.0) || !std::isfinite(std_)) throw ConfigError(kModule, "component std must be >= 0");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0)) throw ConfigError(kModule, "mixture weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError(kModule, "mixture weights must sum to 1");
    log_weights_.reserve(weights_.size());
    for (double w : weights_) log_weights_.push_back(std::log(w));
}

GmmOracle::GmmOracle(Tensor means, double component_std)
    : GmmOracle(means, component_std,
                std::vector<double>(means.rank() == 2 ? means.shape()[0] : 0,
                                    1.0 / static_cast<double>(means.rank() == 2 ? means.shape()[0] : 1))) {}

GmmOracle GmmOracle::ring(std::size_t modes, double radius, double component_std, double center_x,
                          double center_y) {
    if (modes == 0) throw ConfigError(kModule, "ring needs at least one mode");
    Tensor means({modes, 2});
    for (std::size_t k = 0; k < modes; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(modes);
        means.at(k, 0) = center_x + radius * std::cos(angle);
        means.at(k, 1) = center_y + radius * std::sin(angle);
    }
    return GmmOracle(std::move(means), component_std);
}

void GmmOracle::check(const Tensor& x) const {
    if (x.rank() != 2 || x.shape()[1] != dim()) {
        throw DimensionError(kModule, "expected points [B," + std::to_string(dim()) + "], got " +
                                          shape_string(x.shape()));
    }
}

double GmmOracle::smoothed_var(double sigma) const {
    if (!(sigma >= 0.0)) throw DomainError(kModule, "smoothing sigma must be >= 0");
    const double v = std_ * std_ + sigma * sigma;
    if (!(v > 0.0)) throw DomainError(kModule, "point-mass mixture has no density without smoothing");
    return v;
}

Tensor GmmOracle::responsibilities(const Tensor& x, double sigma) const {
    check(x);
    const double var = smoothed_var(sigma);
    const std::size_t rows = x.shape()[0];
    const std::size_t m = modes();
    const std::size_t d = dim();
    Tensor out({rows, m});
    for (std::size_t r = 0; r < rows; ++r) {
        double best = -INFINITY;
        for (std::size_t k = 0; k < m; ++k) {
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x.at(r, j) - means_.at(k, j);
                sq += diff * diff;
            }
            const double logit = log_weights_[k] - 0.5 * sq / var;
            out.at(r, k) = logit;
            best = std::max(best, logit);
        }
        double total = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double e = std::exp(out.at(r, k) - best);
            out.at(r, k) = e;
            total += e;
        }
        for (std::size_t k = 0; k < m; ++k) out.at(r, k) /= total;
    }
    return out;
}

Tensor GmmOracle::log_density(const Tensor& x, double sigma) const {
    check(x);
    const double var = smoothed_var(sigma);
    const std::size_t rows = x.shape()[0];
    const std::size_t m = modes();
    const std::size_t d = dim();
    const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * var);
    Tensor out({rows});
    std::vector<double> logits(m);
    for (std::size_t r = 0; r < rows; ++r) {
        double best = -INFINITY;
        for (std::size_t k = 0; k < m; ++k) {
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x.at(r, j) - means_.at(k, j);
                sq += diff * diff;
            }
            logits[k] = log_weights_[k] - 0.5 * sq / var;
            best = std::max(best, logits[k]);
        }
        double total = 0.0;
        for (double l : logits) total += std::exp(l - best);
        out[r] = best + std::log(total) + log_norm;
    }
    return out;
}

Tensor GmmOracle::smoothed_score(const Tensor& x, double sigma) const {
    const Tensor resp = responsibilities(x, sigma);
    const double var = smoothed_var(sigma);
    const std::size_t rows = x.shape()[0];
    const std::size_t d = dim();
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            double mean = 0.0;
            for (std::size_t k = 0; k < modes(); ++k) mean += resp.at(r, k) * means_.at(k, j);
            out.at(r, j) = -(x.at(r, j) - mean) / var;
        }
    }
    return out;
}

Tensor GmmOracle::sample(std::size_t n, Rng& rng, std::vector<std::size_t>& components) const {
    const std::size_t d = dim();
    Tensor out({n, d});
    components.assign(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t k = modes() - 1;
        for (std::size_t c = 0; c < modes(); ++c) {
            acc += weights_[c];
            if (u < acc) {
                k = c;
                break;
            }
        }
        components[r] = k;
        for (std::size_t j = 0; j < d; ++j) out.at(r, j) = means_.at(k, j) + std_ * rng.normal();
    }
    return out;
}

Tensor GmmOracle::sample(std::size_t n, Rng& rng) const {
    std::vector<std::size_t> ignored;
    return sample(n, rng, ignored);
}

Tensor GmmEnergy::energy(const Tensor& x) const {
    check_input(x, kModule);
    Tensor e = oracle_.log_density(x, sigma_);
    for (double& v : e.data()) v = -v;
    return e;
}

Tensor GmmEnergy::energy_grad(const Tensor& x) const {
    check_input(x, kModule);
    Tensor g = oracle_.smoothed_score(x, sigma_);
    for (double& v : g.data()) v = -v;
    return g;
}

}  // namespace mdsm
