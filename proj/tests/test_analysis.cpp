#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdsm/analysis.hpp"
#include "mdsm/energy_model.hpp"
#include "mdsm/error.hpp"
#include "mdsm/gmm_oracle.hpp"
#include "test_util.hpp"

using namespace mdsm;

TEST(GmmOracle, SingleComponentScore) {
    const GmmOracle g(Tensor::matrix({{1.0, -2.0}}), 0.5);
    const Tensor x = Tensor::matrix({{0.0, 0.0}, {3.0, 1.0}});
    const double sigma = 0.3;
    const double v = 0.25 + 0.09;
    const Tensor s = g.smoothed_score(x, sigma);
    EXPECT_NEAR(s.at(0, 0), -(0.0 - 1.0) / v, 1e-14);
    EXPECT_NEAR(s.at(1, 1), -(1.0 + 2.0) / v, 1e-14);
    const Tensor lp = g.log_density(x, sigma);
    EXPECT_NEAR(lp[0], -std::log(2 * M_PI * v) - 0.5 * (1.0 + 4.0) / v, 1e-13);
}

TEST(GmmOracle, SymmetricMidpoint) {
    const GmmOracle g(Tensor::matrix({{-1.0, 0.3}, {1.0, 0.3}}), 0.2);
    const Tensor s = g.smoothed_score(Tensor::matrix({{0.0, 0.7}}), 0.1);
    EXPECT_EQ(s.at(0, 0), 0.0);
    EXPECT_LT(s.at(0, 1), 0.0);
}

TEST(GmmOracle, ScoreMatchesFiniteDifferences) {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor means = testutil::uniform_tensor({3, 3}, rng);
        std::vector<double> w{rng.uniform() + 0.1, rng.uniform() + 0.1, rng.uniform() + 0.1};
        const double total = w[0] + w[1] + w[2];
        for (double& v : w) v /= total;
        w[2] = 1.0 - w[0] - w[1];
        const GmmOracle g(means, 0.3 + rng.uniform(), w);
        const double sigma = 0.5 * rng.uniform();
        const Tensor x = testutil::uniform_tensor({8, 3}, rng, -3, 3);
        const Tensor s = g.smoothed_score(x, sigma);
        const double h = 1e-5;
        for (std::size_t i = 0; i < x.numel(); ++i) {
            Tensor xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const std::size_t r = i / 3;
            const double num = (g.log_density(xp, sigma)[r] - g.log_density(xm, sigma)[r]) / (2 * h);
            EXPECT_LE(std::abs(num - s[i]) / std::max(std::abs(s[i]), 1e-8), 1e-6);
        }
    }
}

TEST(GmmOracle, FarPointsStayFinite) {
    const GmmOracle g = GmmOracle::ring();
    const Tensor s = g.smoothed_score(Tensor::matrix({{1e3, -1e3}}), 0.0);
    EXPECT_TRUE(s.all_finite());
    EXPECT_TRUE(g.log_density(Tensor::matrix({{1e3, -1e3}}), 0.0).all_finite());
}

TEST(GmmOracle, Validation) {
    EXPECT_THROW(GmmOracle(Tensor::matrix({{0.0}, {1.0}}), 0.1, {0.5, 0.6}), ConfigError);
    EXPECT_THROW(GmmOracle(Tensor::matrix({{0.0}}), -0.1), ConfigError);
    EXPECT_THROW(GmmOracle(Tensor::matrix({{0.0}, {1.0}}), 0.1, {1.0}), DimensionError);
    const GmmOracle point(Tensor::matrix({{0.0}}), 0.0);
    EXPECT_THROW((void)point.log_density(Tensor::matrix({{0.0}}), 0.0), DomainError);
    const GmmOracle ring = GmmOracle::ring(8, 1.0, 0.05);
    EXPECT_NEAR(ring.means().at(2, 1), 1.0, 1e-15);
    double wsum = std::accumulate(ring.weights().begin(), ring.weights().end(), 0.0);
    EXPECT_NEAR(wsum, 1.0, 1e-12);
}

TEST(GmmEnergy, IsNegativeLogDensity) {
    const GmmOracle g = GmmOracle::ring();
    const GmmEnergy e(g, 0.1);
    const Tensor x = Tensor::matrix({{0.9, 0.1}, {0.0, 0.0}});
    const Tensor lp = g.log_density(x, 0.1);
    EXPECT_EQ(e.energy(x)[1], -lp[1]);
    EXPECT_EQ(e.energy_grad(x).at(0, 0), -g.smoothed_score(x, 0.1).at(0, 0));
}

TEST(Concentration, HighDimensionalShell) {
    Rng rng(1);
    const ShellSpec spec{3072, 0.1, 0.3};
    const ConcentrationStats st = concentration_stats(spec, 10000, rng);
    EXPECT_NEAR(st.mean_norm, 5.5426, 0.01 * 5.5426);
    EXPECT_LE(st.cv, 2.0 / std::sqrt(2.0 * 3072));
    EXPECT_LE(st.mean_abs_cos, 0.03);
    EXPECT_NEAR(st.mean_abs_cos, std::sqrt(2.0 / (M_PI * 3072)), 0.002);
    EXPECT_GT(st.shell_fraction, 0.99);
}

TEST(Concentration, LowDimensionRunsAndErrors) {
    Rng rng(2);
    const ConcentrationStats st = concentration_stats(ShellSpec{1, 1.0, 0.0}, 1000, rng);
    EXPECT_GT(st.mean_norm, 0.0);
    EXPECT_THROW((void)concentration_stats(ShellSpec{3, 1.0, 0.0}, 99, rng), ConfigError);
    EXPECT_THROW((void)concentration_stats(ShellSpec{0, 1.0, 0.0}, 100, rng), ConfigError);
}

TEST(ShellError, OracleAsModelIsExactAtMatchedNoise) {
    const GmmOracle g = GmmOracle::ring();
    const double sigma_eval = 0.3;
    const GmmEnergy e(g, sigma_eval);
    const std::vector<double> radii{0.25, 0.5, 1.0, 2.0, 4.0};
    Rng rng(3);
    const auto errs = shell_score_error(e, g, radii, sigma_eval, sigma_eval, 500, rng);
    ASSERT_EQ(errs.size(), 5u);
    EXPECT_LE(errs[2].error, 1e-10);
    EXPECT_LE(errs[2].mse, 1e-10);
    EXPECT_NEAR(errs[2].mean_cos, 1.0, 1e-12);
    EXPECT_EQ(errs[0].sigma_eff, 0.25 * sigma_eval);
    // A fixed-noise exact energy mismatches other shells.
    EXPECT_GT(errs[0].error, 1e-3);
    EXPECT_GT(errs[4].error, 1e-3);
}

TEST(ScoreAgreement, OracleEnergyAgreesPerfectly) {
    const GmmOracle g = GmmOracle::ring();
    const GmmEnergy e(g, 0.1);
    const std::vector<double> levels{0.05, 0.5, 1.2};
    Rng rng(4);
    const ScoreAgreement a = score_agreement(e, g, levels, 0.1, 200, rng);
    EXPECT_NEAR(a.mean_cos, 1.0, 1e-12);
    EXPECT_EQ(a.per_level_cos.size(), 3u);
}

TEST(ModeCoverage, OracleSamplesCoverAllModes) {
    const GmmOracle g = GmmOracle::ring();
    Rng rng(5);
    const std::size_t n = 8000;
    const Tensor x = g.sample(n, rng);
    const ModeCoverage c = mode_coverage(x, g, default_mode_threshold(g, 0.1));
    EXPECT_EQ(c.n_covered, 8u);
    EXPECT_EQ(c.unassigned, 0u);
    const double p = 1.0 / 8.0;
    const double band = 3.0 * std::sqrt(n * p * (1 - p));
    for (std::size_t k : c.counts) EXPECT_NEAR(static_cast<double>(k), n * p, band);
}

TEST(ModeCoverage, CollapsedSamples) {
    const GmmOracle g = GmmOracle::ring();
    const Tensor x = Tensor::full({50, 2}, 0.0);
    Tensor at_mean({50, 2});
    for (std::size_t r = 0; r < 50; ++r) {
        at_mean.at(r, 0) = g.means().at(3, 0);
        at_mean.at(r, 1) = g.means().at(3, 1);
    }
    const ModeCoverage c = mode_coverage(at_mean, g, 0.1);
    EXPECT_EQ(c.n_covered, 1u);
    EXPECT_EQ(c.counts[3], 50u);
    EXPECT_EQ(c.min_share, 0.0);
    EXPECT_EQ(mode_coverage(x, g, 0.1).unassigned, 50u);
    EXPECT_NEAR(default_mode_threshold(g, 0.1), 3 * std::sqrt(0.0025 + 0.01) * std::sqrt(2.0), 1e-15);
    EXPECT_THROW((void)mode_coverage(x, g, 0.0), DomainError);
}

TEST(NnCheck, IdentitiesAndBruteForce) {
    Rng rng(6);
    const Tensor data = testutil::uniform_tensor({40, 3}, rng);
    Tensor samples({5, 3});
    for (std::size_t j = 0; j < 3; ++j) samples.at(0, j) = data.at(17, j);
    for (std::size_t i = 3; i < 15; ++i) samples[i] = rng.normal();
    const NeighborResult r = nn_check(samples, data, 40);
    EXPECT_EQ(r.indices[0][0], 17u);
    EXPECT_EQ(r.distances[0][0], 0.0);
    for (std::size_t i = 0; i < 5; ++i) {
        // Independent oracle: full sort of explicit distances.
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t n = 0; n < 40; ++n) {
            double s = 0.0;
            for (std::size_t j = 0; j < 3; ++j) s += (samples.at(i, j) - data.at(n, j)) * (samples.at(i, j) - data.at(n, j));
            all.emplace_back(std::sqrt(s), n);
        }
        std::sort(all.begin(), all.end());
        for (std::size_t k = 0; k < 40; ++k) {
            EXPECT_EQ(r.indices[i][k], all[k].second);
            EXPECT_EQ(r.distances[i][k], all[k].first);
        }
    }
    const NeighborResult top = nn_check(samples, data, 10);
    EXPECT_EQ(top.indices[2].size(), 10u);
    EXPECT_EQ(std::vector<std::size_t>(r.indices[2].begin(), r.indices[2].begin() + 10), top.indices[2]);
    EXPECT_THROW((void)nn_check(samples, data, 41), ConfigError);
    EXPECT_THROW((void)nn_check(samples, data, 0), ConfigError);
}

TEST(Ood, ConstantEnergyScoresIdentical) {
    const ConstantEnergy flat(2, 1.5);
    Rng rng(7);
    const Tensor s = ood_energy_score(flat, testutil::uniform_tensor({10, 2}, rng, -5, 5), 0.1, rng);
    for (double v : s.data()) EXPECT_EQ(v, 1.5);
    EXPECT_THROW((void)ood_energy_score(flat, Tensor::zeros({1, 2}), 0.1, rng, 0), ConfigError);
}

TEST(Ood, PointEnergyRisesOffManifold) {
    const Tensor mu = Tensor::vector({0.5, 0.5});
    const double sigma0 = 0.1;
    const QuadraticEnergy e(mu, sigma0);
    Rng rng(8);
    int wins = 0;
    for (int t = 0; t < 1000; ++t) {
        const Tensor on = Tensor::matrix({{0.5, 0.5}});
        const double angle = rng.uniform() * 2 * M_PI;
        const Tensor off = Tensor::matrix({{0.5 + 5 * sigma0 * std::cos(angle), 0.5 + 5 * sigma0 * std::sin(angle)}});
        if (ood_energy_score(e, on, sigma0, rng)[0] < ood_energy_score(e, off, sigma0, rng)[0]) ++wins;
    }
    EXPECT_GE(wins, 990);
}

TEST(Pearson, Basics) {
    const std::vector<double> a{1, 2, 3, 4};
    const std::vector<double> b{2, 4, 6, 8};
    const std::vector<double> c{4, 3, 2, 1};
    EXPECT_NEAR(pearson(a, b), 1.0, 1e-15);
    EXPECT_NEAR(pearson(a, c), -1.0, 1e-15);
}
