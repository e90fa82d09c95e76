#include <gtest/gtest.h>

#include <cmath>

#include "mdsm/energy_model.hpp"
#include "mdsm/energy_net.hpp"
#include "mdsm/error.hpp"
#include "mdsm/sampler.hpp"
#include "test_util.hpp"

using namespace mdsm;

namespace {

double variance(const Tensor& t) {
    double m = 0.0;
    for (double v : t.data()) m += v;
    m /= static_cast<double>(t.numel());
    double s = 0.0;
    for (double v : t.data()) s += (v - m) * (v - m);
    return s / static_cast<double>(t.numel());
}

EnergyNet random_net(std::uint64_t seed) {
    NetConfig cfg;
    cfg.hidden_dims = {16, 16};
    cfg.seed = seed;
    return EnergyNet::init(cfg);
}

}  // namespace

TEST(Anneal, Defaults) {
    const AnnealSchedule s = default_anneal();
    ASSERT_EQ(s.size(), 2700u);
    EXPECT_EQ(s.temperatures.front(), 100.0);
    EXPECT_EQ(s.temperatures.back(), 0.25);
    EXPECT_EQ(s.step_size, 0.02);
    const std::size_t decay = anneal_decay_steps(2700);
    EXPECT_EQ(decay, 2430u);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s.temperatures[i], s.temperatures[i - 1]);
    for (std::size_t i = decay - 1; i < s.size(); ++i) EXPECT_EQ(s.temperatures[i], 0.25);
    // Geometric decay: constant ratio.
    const double ratio = s.temperatures[1] / s.temperatures[0];
    EXPECT_NEAR(s.temperatures[100] / s.temperatures[99], ratio, 1e-12);
}

TEST(Anneal, SingleStepAndErrors) {
    const AnnealSchedule s = default_anneal(1, 100.0, 0.25);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s.temperatures[0], 100.0);
    EXPECT_THROW((void)default_anneal(0), ConfigError);
    EXPECT_THROW((void)default_anneal(10, 0.1, 1.0), ConfigError);
    EXPECT_THROW((void)default_anneal(10, 1.0, 0.0), ConfigError);
    AnnealSchedule bad{{1.0, -1.0}, 0.02};
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Langevin, PureDiffusionVariance) {
    const ConstantEnergy flat(1, 0.0);
    Rng rng(1);
    const Tensor x = Tensor::zeros({100000, 1});
    const double eps = 0.02, t = 4.0;
    const Tensor y = langevin_step(flat, x, t, eps, rng);
    EXPECT_NEAR(variance(y), eps * eps * t, 0.02 * eps * eps * t);
}

TEST(Langevin, OrnsteinUhlenbeckStationaryVariance) {
    const QuadraticEnergy q = QuadraticEnergy::isotropic(2, 1.0);
    Rng rng(2);
    const double eps = 0.1, t = 1.5;
    Tensor x = Tensor::zeros({4000, 2});
    for (int i = 0; i < 1500; ++i) x = langevin_step(q, x, t, eps, rng);
    const double expect = t / (1.0 - eps * eps / 4.0);
    EXPECT_NEAR(variance(x), expect, 0.05 * expect);
    EXPECT_NEAR(variance(x), t, 0.05 * t);
}

TEST(Langevin, DeterministicAndErrors) {
    const EnergyNet net = random_net(1);
    Rng data(3);
    const Tensor x = testutil::uniform_tensor({10, 2}, data);
    Rng a(5), b(5);
    EXPECT_TRUE(langevin_step(net, x, 2.0, 0.02, a).bit_equal(langevin_step(net, x, 2.0, 0.02, b)));
    EXPECT_THROW((void)langevin_step(net, x, 0.0, 0.02, a), DomainError);
    EXPECT_THROW((void)langevin_step(net, x, 1.0, -0.02, a), DomainError);
    EXPECT_THROW((void)langevin_step(net, Tensor::zeros({3, 5}), 1.0, 0.02, a), DimensionError);
}

TEST(DenoiseJump, PointMassExact) {
    const Tensor mu = Tensor::vector({0.3, -0.2, 0.9});
    const double sigma0 = 0.1;
    const QuadraticEnergy e(mu, sigma0);
    Rng rng(4);
    for (double scale : {0.01, 0.1, 1.0, 10.0}) {
        Tensor x({50, 3});
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] = mu[i % 3] + scale * rng.normal();
        const Tensor y = denoise_jump(e, x, sigma0);
        for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y[i], mu[i % 3], 1e-12) << scale;
    }
}

TEST(DenoiseJump, GaussianPosteriorMean) {
    const Tensor mu = Tensor::vector({1.0, 2.0});
    const double s = 0.5, sigma0 = 0.2;
    const double v = s * s + sigma0 * sigma0;
    const QuadraticEnergy e(mu, std::sqrt(v));
    const Tensor x = Tensor::matrix({{0.0, 0.0}, {3.0, -1.0}});
    const Tensor y = denoise_jump(e, x, sigma0);
    for (std::size_t i = 0; i < y.numel(); ++i) {
        const double expect = x[i] - sigma0 * sigma0 * (x[i] - mu[i % 2]) / v;
        EXPECT_NEAR(y[i], expect, 1e-14);
    }
}

TEST(DenoiseJump, ZeroGradientIdentity) {
    const ConstantEnergy flat(2, 1.0);
    const Tensor x = Tensor::matrix({{0.1, 0.2}, {-3.0, 4.0}});
    EXPECT_TRUE(denoise_jump(flat, x, 0.3).bit_equal(x));
    EXPECT_THROW((void)denoise_jump(flat, x, 0.0), DomainError);
}

TEST(Sample, ConstantNetDiffusionCloud) {
    const ConstantEnergy flat(2, 0.0);
    const AnnealSchedule s = default_anneal(200, 4.0, 0.25, 0.05);
    SampleOptions opt;
    opt.sigma0 = 0.1;
    opt.init_center = 0.5;
    Rng rng(6);
    const SampleResult r = sample(flat, 20000, s, rng, opt);
    double expect = s.temperatures.front() * opt.sigma0 * opt.sigma0;
    for (double t : s.temperatures) expect += s.step_size * s.step_size * t;
    EXPECT_NEAR(variance(r.samples), expect, 0.02 * expect);
    EXPECT_TRUE(r.samples.bit_equal(r.annealed));
    double mean = 0.0;
    for (double v : r.samples.data()) mean += v;
    EXPECT_NEAR(mean / static_cast<double>(r.samples.numel()), 0.5, 0.01);
}

TEST(Sample, DeterministicWithTrace) {
    const EnergyNet net = random_net(2);
    const AnnealSchedule s = default_anneal(50, 10.0, 0.25);
    SampleOptions opt;
    opt.trace = true;
    Rng a(9), b(9);
    const SampleResult ra = sample(net, 30, s, a, opt);
    const SampleResult rb = sample(net, 30, s, b, opt);
    EXPECT_TRUE(ra.samples.bit_equal(rb.samples));
    ASSERT_EQ(ra.trace.size(), 50u);
    EXPECT_EQ(ra.trace[0].step, 1u);
    EXPECT_EQ(ra.trace[0].temperature, 10.0);
    EXPECT_EQ(ra.trace[10].mean_energy, rb.trace[10].mean_energy);
    // Tracing does not change the trajectory.
    Rng c(9);
    EXPECT_TRUE(sample(net, 30, s, c).samples.bit_equal(ra.samples));
}

TEST(Sample, TraceMatchesEnergyAtStepStart) {
    const QuadraticEnergy q = QuadraticEnergy::isotropic(2, 1.0);
    const AnnealSchedule s = default_anneal(3, 2.0, 1.0);
    SampleOptions opt;
    opt.trace = true;
    opt.init_center = 0.0;
    Rng a(1), b(1);
    const SampleResult r = sample(q, 5, s, a, opt);
    // Replay by hand.
    Tensor x({5, 2});
    const double spread = std::sqrt(2.0) * opt.sigma0;
    for (double& v : x.data()) v = spread * b.normal();
    for (std::size_t t = 0; t < 3; ++t) {
        const Tensor e = q.energy(x);
        double mean = 0.0;
        for (double v : e.data()) mean += v;
        EXPECT_DOUBLE_EQ(r.trace[t].mean_energy, mean / 5.0);
        x = langevin_step(q, x, s.temperatures[t], s.step_size, b);
    }
    EXPECT_TRUE(x.bit_equal(r.annealed));
}

TEST(Invariance, RescaledTrajectoryIsBitExact) {
    const EnergyNet net = random_net(3);
    const AnnealSchedule base = default_anneal(300, 100.0, 0.25);
    SampleOptions opt;
    opt.sigma0 = 0.1;
    Rng r0(17);
    const SampleResult ref = sample(net, 64, base, r0, opt);
    for (double alpha : {0.5, 2.0, 4.0}) {
        AnnealSchedule scaled = base;
        for (double& t : scaled.temperatures) t /= alpha * alpha;
        scaled.step_size *= alpha;
        SampleOptions o = opt;
        o.sigma0 *= alpha;
        Rng r1(17);
        const SampleResult got = sample(net.rescaled(alpha), 64, scaled, r1, o);
        EXPECT_TRUE(got.annealed.bit_equal(ref.annealed)) << alpha;
        EXPECT_TRUE(got.samples.bit_equal(ref.samples)) << alpha;
    }
}

TEST(Inpaint, AllFreeMaskEqualsSample) {
    const EnergyNet net = random_net(4);
    const AnnealSchedule s = default_anneal(40, 10.0, 0.25);
    const Tensor known = Tensor::zeros({12, 2});
    Rng a(3), b(3);
    const SampleResult ip = inpaint(net, known, {false, false}, s, a);
    const SampleResult sm = sample(net, 12, s, b);
    EXPECT_TRUE(ip.samples.bit_equal(sm.samples));
}

TEST(Inpaint, KnownCoordinatesRestoredExactly) {
    const EnergyNet net = random_net(5);
    const AnnealSchedule s = default_anneal(40, 10.0, 0.25);
    Rng data(2);
    const Tensor known = testutil::uniform_tensor({12, 2}, data);
    Rng rng(3);
    const SampleResult ip = inpaint(net, known, {true, false}, s, rng);
    for (std::size_t r = 0; r < 12; ++r) EXPECT_EQ(ip.samples.at(r, 0), known.at(r, 0));
    EXPECT_THROW((void)inpaint(net, known, {true, true}, s, rng), ConfigError);
    EXPECT_THROW((void)inpaint(net, known, {true}, s, rng), DimensionError);
}

TEST(Inpaint, ClampedQuadraticConditional) {
    // E = ||x||^2 / 2 with x_0 clamped: free coordinate settles near 0 with
    // spread sqrt(T_end) at the final temperature.
    const QuadraticEnergy q = QuadraticEnergy::isotropic(2, 1.0);
    const AnnealSchedule s = default_anneal(2000, 4.0, 0.25, 0.1);
    SampleOptions opt;
    opt.final_jump = false;
    const Tensor known = Tensor::full({4000, 2}, 0.7);
    Rng rng(8);
    const SampleResult r = inpaint(q, known, {true, false}, s, rng, opt);
    double m = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < 4000; ++i) {
        m += r.samples.at(i, 1);
        sq += r.samples.at(i, 1) * r.samples.at(i, 1);
    }
    m /= 4000.0;
    EXPECT_NEAR(m, 0.0, 0.05);
    EXPECT_NEAR(sq / 4000.0 - m * m, 0.25, 0.05 * 0.25);
}
