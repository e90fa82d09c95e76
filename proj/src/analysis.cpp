#include "mdsm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mdsm/error.hpp"

namespace mdsm {

namespace {

constexpr const char* kModule = "analysis";

double row_dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void random_unit(std::span<double> out, Rng& rng) {
    double n2 = 0.0;
    do {
        rng.fill_normal(out);
        n2 = row_dot(out, out);
    } while (n2 == 0.0);
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : out) v *= inv;
}

}  // namespace

void ShellSpec::validate() const {
    if (d < 1) throw ConfigError(kModule, "shell dimension must be >= 1");
    if (!(sigma > 0.0)) throw ConfigError(kModule, "shell sigma must be positive");
    if (!(epsilon >= 0.0)) throw ConfigError(kModule, "shell epsilon must be >= 0");
}

double ShellSpec::radius() const { return std::sqrt(static_cast<double>(d)) * sigma; }

ConcentrationStats concentration_stats(const ShellSpec& spec, std::size_t n, Rng& rng) {
    spec.validate();
    if (n < 100) throw ConfigError(kModule, "concentration_stats needs at least 100 samples");
    std::vector<double> v(spec.d);
    random_unit(v, rng);
    std::vector<double> draw(spec.d);
    double sum = 0.0, sq = 0.0, cos_sum = 0.0;
    std::size_t in_shell = 0;
    const double r = spec.radius();
    for (std::size_t i = 0; i < n; ++i) {
        rng.fill_normal(draw, 0.0, spec.sigma);
        const double norm = std::sqrt(row_dot(draw, draw));
        sum += norm;
        sq += norm * norm;
        cos_sum += std::abs(row_dot(draw, v)) / norm;
        if (std::abs(norm - r) <= spec.epsilon) ++in_shell;
    }
    const double dn = static_cast<double>(n);
    ConcentrationStats out;
    out.mean_norm = sum / dn;
    const double var = std::max(0.0, (sq - dn * out.mean_norm * out.mean_norm) / (dn - 1.0));
    out.cv = std::sqrt(var) / out.mean_norm;
    out.mean_abs_cos = cos_sum / dn;
    out.shell_fraction = static_cast<double>(in_shell) / dn;
    return out;
}

std::vector<ShellError> shell_score_error(const EnergyModel& model, const GmmOracle& oracle,
                                          std::span<const double> radii, double sigma_eval, double sigma0,
                                          std::size_t n, Rng& rng) {
    if (!(sigma_eval > 0.0) || !(sigma0 > 0.0)) throw DomainError(kModule, "noise scales must be positive");
    if (n < 1) throw ConfigError(kModule, "need at least one evaluation point");
    if (model.dim() != oracle.dim()) throw DimensionError(kModule, "model and oracle dimensions differ");
    const std::size_t d = oracle.dim();
    std::vector<ShellError> out;
    std::vector<double> u(d);
    for (double r : radii) {
        if (!(r > 0.0)) throw DomainError(kModule, "radii must be positive");
        const double sigma_eff = r * sigma_eval;
        const double dist = r * std::sqrt(static_cast<double>(d)) * sigma_eval;
        Tensor x = oracle.sample(n, rng);
        for (std::size_t i = 0; i < n; ++i) {
            random_unit(u, rng);
            for (std::size_t j = 0; j < d; ++j) x.at(i, j) += dist * u[j];
        }
        const Tensor grad = model.energy_grad(x);
        const Tensor target = oracle.smoothed_score(x, sigma_eff);
        const double factor = -(sigma0 * sigma0) / (sigma_eff * sigma_eff);
        double err = 0.0, norm = 0.0, cos_sum = 0.0;
        std::vector<double> implied(d);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) implied[j] = factor * grad.at(i, j);
            const auto t = target.row(i);
            double tt = 0.0, mm = 0.0, mt = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = implied[j] - t[j];
                err += diff * diff;
                tt += t[j] * t[j];
                mm += implied[j] * implied[j];
                mt += implied[j] * t[j];
            }
            norm += tt;
            cos_sum += (mm > 0.0 && tt > 0.0) ? mt / std::sqrt(mm * tt) : 0.0;
        }
        const double dn = static_cast<double>(n);
        out.push_back({r, sigma_eff, norm > 0.0 ? err / norm : err, err / dn, cos_sum / dn});
    }
    return out;
}

ScoreAgreement score_agreement(const EnergyModel& model, const GmmOracle& oracle, std::span<const double> levels,
                               double sigma0, std::size_t per_level, Rng& rng) {
    if (levels.empty() || per_level < 1) throw ConfigError(kModule, "need levels and points per level");
    const std::size_t d = oracle.dim();
    ScoreAgreement out;
    double total = 0.0;
    for (double sigma : levels) {
        Tensor x = oracle.sample(per_level, rng);
        for (double& v : x.data()) v += sigma * rng.normal();
        const Tensor grad = model.energy_grad(x);
        const Tensor target = oracle.smoothed_score(x, sigma0);
        double cos_sum = 0.0;
        for (std::size_t i = 0; i < per_level; ++i) {
            double mt = 0.0, mm = 0.0, tt = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double m = -grad.at(i, j);
                const double t = target.at(i, j);
                mt += m * t;
                mm += m * m;
                tt += t * t;
            }
            cos_sum += (mm > 0.0 && tt > 0.0) ? mt / std::sqrt(mm * tt) : 0.0;
        }
        const double c = cos_sum / static_cast<double>(per_level);
        out.per_level_cos.push_back(c);
        total += c;
    }
    out.mean_cos = total / static_cast<double>(levels.size());
    return out;
}

double default_mode_threshold(const GmmOracle& oracle, double sigma0) {
    const double s = oracle.component_std();
    return 3.0 * std::sqrt(s * s + sigma0 * sigma0) * std::sqrt(static_cast<double>(oracle.dim()));
}

ModeCoverage mode_coverage(const Tensor& samples, const GmmOracle& oracle, double threshold) {
    if (!(threshold > 0.0)) throw DomainError(kModule, "mode threshold must be positive");
    if (samples.rank() != 2 || samples.shape()[1] != oracle.dim()) {
        throw DimensionError(kModule, "samples must be [M," + std::to_string(oracle.dim()) + "]");
    }
    const std::size_t m = samples.shape()[0];
    const std::size_t modes = oracle.modes();
    const std::size_t d = oracle.dim();
    ModeCoverage out;
    out.counts.assign(modes, 0);
    const double thr2 = threshold * threshold;
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        double best_d2 = INFINITY;
        for (std::size_t k = 0; k < modes; ++k) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = samples.at(i, j) - oracle.means().at(k, j);
                d2 += diff * diff;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = k;
            }
        }
        if (best_d2 <= thr2) {
            ++out.counts[best];
        } else {
            ++out.unassigned;
        }
    }
    out.n_covered = static_cast<std::size_t>(std::count_if(out.counts.begin(), out.counts.end(),
                                                            [](std::size_t c) { return c > 0; }));
    const std::size_t smallest = *std::min_element(out.counts.begin(), out.counts.end());
    out.min_share = m ? static_cast<double>(smallest) / static_cast<double>(m) : 0.0;
    return out;
}

NeighborResult nn_check(const Tensor& samples, const Tensor& dataset, std::size_t k) {
    if (samples.rank() != 2 || dataset.rank() != 2 || samples.shape()[1] != dataset.shape()[1]) {
        throw DimensionError(kModule, "samples and dataset must be [M,d] and [N,d]");
    }
    const std::size_t n = dataset.shape()[0];
    if (k < 1 || k > n) throw ConfigError(kModule, "k must be in [1, N]");
    const std::size_t m = samples.shape()[0];
    const std::size_t d = samples.shape()[1];
    NeighborResult out;
    out.indices.resize(m);
    out.distances.resize(m);
    std::vector<double> d2(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = samples.at(i, j) - dataset.at(r, j);
                s += diff * diff;
            }
            d2[r] = s;
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto closer = [&d2](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); };
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);
        out.indices[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        out.distances[i].reserve(k);
        for (std::size_t c = 0; c < k; ++c) out.distances[i].push_back(std::sqrt(d2[order[c]]));
    }
    return out;
}

Tensor ood_energy_score(const EnergyModel& model, const Tensor& x, double sigma0, Rng& rng, std::size_t n_noise) {
    if (n_noise < 1) throw ConfigError(kModule, "n_noise must be >= 1");
    if (!(sigma0 > 0.0)) throw DomainError(kModule, "sigma0 must be positive");
    if (x.rank() != 2 || x.shape()[1] != model.dim()) throw DimensionError(kModule, "points do not match the model");
    const std::size_t b = x.shape()[0];
    Tensor score = Tensor::zeros({b});
    Tensor noisy(x.shape());
    for (std::size_t t = 0; t < n_noise; ++t) {
        for (std::size_t i = 0; i < x.numel(); ++i) noisy[i] = x[i] + sigma0 * rng.normal();
        const Tensor e = model.energy(noisy);
        for (std::size_t i = 0; i < b; ++i) score[i] += e[i];
    }
    for (double& v : score.data()) v /= static_cast<double>(n_noise);
    return score;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw DimensionError(kModule, "pearson needs two equal series");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace mdsm
