#include "mdsm/noise.hpp"

#include <cmath>
#include <string>

#include "mdsm/error.hpp"

namespace mdsm {

Spacing parse_spacing(std::string_view name) {
    if (name == "linear") return Spacing::Linear;
    if (name == "geometric") return Spacing::Geometric;
    throw ConfigError("noise-model", "unknown spacing '" + std::string(name) + "'");
}

std::string_view spacing_name(Spacing spacing) noexcept {
    return spacing == Spacing::Linear ? "linear" : "geometric";
}

NoiseSchedule make_schedule(double min, double max, std::size_t k, Spacing spacing, double sigma0) {
    if (!(min > 0.0)) throw ConfigError("noise-model", "minimum noise level must be positive");
    if (min > max) throw ConfigError("noise-model", "minimum noise level exceeds maximum");
    if (k == 0) throw ConfigError("noise-model", "need at least one noise level");
    if (!(sigma0 > 0.0)) throw ConfigError("noise-model", "sigma0 must be positive");

    NoiseSchedule s;
    s.spacing = spacing;
    s.sigma0 = sigma0;
    s.levels.resize(k);
    if (k == 1) {
        s.levels[0] = min;
        return s;
    }
    const double steps = static_cast<double>(k - 1);
    if (spacing == Spacing::Linear) {
        for (std::size_t i = 0; i < k; ++i) s.levels[i] = min + (max - min) * (static_cast<double>(i) / steps);
    } else {
        const double lo = std::log(min);
        const double hi = std::log(max);
        for (std::size_t i = 0; i < k; ++i) s.levels[i] = std::exp(lo + (hi - lo) * (static_cast<double>(i) / steps));
    }
    s.levels.front() = min;
    s.levels.back() = max;
    return s;
}

PerturbedBatch perturb_batch(const Tensor& x, const NoiseSchedule& schedule, Rng& rng) {
    if (x.rank() != 2 || x.shape()[0] == 0) {
        throw DimensionError("noise-model", "perturb_batch needs a non-empty [B,d] batch, got " +
                                                shape_string(x.shape()));
    }
    if (schedule.levels.empty()) throw ConfigError("noise-model", "empty noise schedule");
    const std::size_t rows = x.shape()[0];
    const std::size_t d = x.shape()[1];
    PerturbedBatch out{Tensor(x.shape()), Tensor({rows})};
    for (std::size_t r = 0; r < rows; ++r) {
        const double sigma = schedule.levels[r % schedule.levels.size()];
        out.sigmas[r] = sigma;
        for (std::size_t j = 0; j < d; ++j) out.noisy.at(r, j) = x.at(r, j) + sigma * rng.normal();
    }
    return out;
}

double weight(double sigma) {
    if (!(sigma > 0.0)) throw DomainError("noise-model", "weight needs sigma > 0");
    return 1.0 / (sigma * sigma);
}

double level_weight(Weighting weighting, double sigma) {
    return weighting == Weighting::InverseVariance ? weight(sigma) : 1.0;
}

}  // namespace mdsm
