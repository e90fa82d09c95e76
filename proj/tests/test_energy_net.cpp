#include <gtest/gtest.h>

#include <cmath>

#include "mdsm/energy_model.hpp"
#include "mdsm/energy_net.hpp"
#include "mdsm/error.hpp"
#include "mdsm/gradcheck.hpp"
#include "test_util.hpp"

using namespace mdsm;

namespace {

EnergyNet constant_net(const NetConfig& cfg, double beta) {
    EnergyNet net = EnergyNet::init(cfg);
    auto p = net.mutable_params();
    const std::size_t h = net.head_offset();
    for (std::size_t i = h; i < h + 6; ++i)
        for (double& v : p[i].data()) v = 0.0;
    p[h + 5][0] = beta;
    return net;
}

// Identity trunk with head E = sum_i h_i^2/(2s^2) + (-mu/s^2).h + |mu|^2/(2s^2).
EnergyNet gaussian_net(const Tensor& mu, double s) {
    NetConfig cfg;
    cfg.input_dim = mu.numel();
    cfg.hidden_dims = {};
    EnergyNet net = EnergyNet::init(cfg);
    auto p = net.mutable_params();
    double mu_sq = 0.0;
    for (std::size_t i = 0; i < mu.numel(); ++i) {
        p[0][i] = -mu[i] / (s * s);  // a
        p[1][i] = 0.0;                // c
        p[2][i] = 0.5 / (s * s);      // d
        mu_sq += mu[i] * mu[i];
    }
    p[3][0] = 0.0;                   // b1
    p[4][0] = 1.0;                   // b2
    p[5][0] = 0.5 * mu_sq / (s * s);  // b3
    return net;
}

}  // namespace

TEST(NetConfig, Validation) {
    NetConfig cfg;
    cfg.input_dim = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.input_dim = 2;
    cfg.hidden_dims = {4, 0};
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(EnergyNet, ParamCount) {
    NetConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden_dims = {4};
    EXPECT_EQ(EnergyNet::param_count(cfg), 27u);
    const EnergyNet net = EnergyNet::init(cfg);
    std::size_t total = 0;
    for (const Tensor& t : net.params()) total += t.numel();
    EXPECT_EQ(total, 27u);
    EXPECT_EQ(EnergyNet::param_names(cfg).front(), "trunk.0.weight");
}

TEST(EnergyNet, InitDeterministic) {
    NetConfig cfg;
    cfg.hidden_dims = {64, 64};
    cfg.seed = 7;
    const EnergyNet a = EnergyNet::init(cfg);
    const EnergyNet b = EnergyNet::init(cfg);
    for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_TRUE(a.params()[i].bit_equal(b.params()[i]));
    cfg.seed = 8;
    EXPECT_FALSE(EnergyNet::init(cfg).params()[0].bit_equal(a.params()[0]));
}

TEST(EnergyNet, InitVariances) {
    NetConfig cfg;
    cfg.input_dim = 50;
    cfg.hidden_dims = {400};
    cfg.seed = 3;
    const EnergyNet net = EnergyNet::init(cfg);
    auto var = [](const Tensor& t) {
        double s = 0.0;
        for (double v : t.data()) s += v * v;
        return s / static_cast<double>(t.numel());
    };
    EXPECT_NEAR(var(net.params()[0]), 2.0 / 50.0, 0.05 * 2.0 / 50.0);
    EXPECT_EQ(var(net.params()[1]), 0.0);
    EXPECT_NEAR(var(net.params()[2]), 1.0 / 400.0, 0.2 / 400.0);
    EXPECT_EQ(net.params()[5][0], 0.0);
}

TEST(EnergyNet, FreshNetFiniteAtOrigin) {
    const EnergyNet net = EnergyNet::init(NetConfig{});
    EXPECT_TRUE(net.energy(Tensor::zeros({1, 2})).all_finite());
}

TEST(EnergyNet, ConstantHead) {
    NetConfig cfg;
    cfg.hidden_dims = {8, 8};
    const EnergyNet net = constant_net(cfg, 3.25);
    Rng rng(1);
    const Tensor x = testutil::uniform_tensor({5, 2}, rng, -10, 10);
    const Tensor e = net.energy(x);
    for (double v : e.data()) EXPECT_EQ(v, 3.25);
    const Tensor g = net.energy_grad(x);
    for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(EnergyNet, HeadFormulaScalar) {
    NetConfig cfg;
    cfg.input_dim = 1;
    cfg.hidden_dims = {};
    EnergyNet net = EnergyNet::init(cfg);
    auto p = net.mutable_params();
    p[0][0] = 1.0;
    p[1][0] = 1.0;
    p[2][0] = 1.0;
    p[3][0] = p[4][0] = p[5][0] = 0.0;
    EXPECT_EQ(net.energy(Tensor::matrix({{2.0}}))[0], 8.0);
}

TEST(EnergyNet, RowIndependence) {
    NetConfig cfg;
    cfg.hidden_dims = {16};
    const EnergyNet net = EnergyNet::init(cfg);
    const Tensor e = net.energy(Tensor::matrix({{0.3, -0.7}, {0.3, -0.7}, {0.3, -0.7}}));
    EXPECT_EQ(e[0], e[1]);
    EXPECT_EQ(e[1], e[2]);
    const Tensor single = net.energy(Tensor::matrix({{0.3, -0.7}}));
    EXPECT_NEAR(single[0], e[0], 1e-14);
}

TEST(EnergyNet, DimensionMismatch) {
    const EnergyNet net = EnergyNet::init(NetConfig{});
    EXPECT_THROW((void)net.energy(Tensor::zeros({3, 5})), DimensionError);
    EXPECT_THROW((void)net.energy_grad(Tensor::zeros({3})), DimensionError);
}

TEST(EnergyNet, GaussianSpecialCaseGradient) {
    const Tensor mu = Tensor::vector({0.5, -1.0, 2.0});
    const double s = 0.7;
    const EnergyNet net = gaussian_net(mu, s);
    Rng rng(4);
    const Tensor x = testutil::uniform_tensor({6, 3}, rng);
    const Tensor g = net.energy_grad(x);
    const Tensor e = net.energy(x);
    for (std::size_t r = 0; r < 6; ++r) {
        double sq = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            const double diff = x.at(r, j) - mu[j];
            EXPECT_NEAR(g.at(r, j), diff / (s * s), 1e-12);
            sq += diff * diff;
        }
        EXPECT_NEAR(e[r], sq / (2 * s * s), 1e-12);
    }
}

TEST(EnergyNet, GradientMatchesFiniteDifferences) {
    NetConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden_dims = {16, 16};
    cfg.seed = 12;
    const EnergyNet net = EnergyNet::init(cfg);
    Rng rng(5);
    const Tensor x = testutil::uniform_tensor({4, 3}, rng);
    const Tensor g = net.energy_grad(x);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        Tensor xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const std::size_t r = i / 3;
        const double num = (net.energy(xp)[r] - net.energy(xm)[r]) / (2 * h);
        worst = std::max(worst, std::abs(g[i] - num) / std::max(std::abs(g[i]), 1e-8));
    }
    EXPECT_LE(worst, 1e-6);
}

TEST(EnergyNet, ParameterGradientOfEnergy) {
    NetConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden_dims = {8};
    cfg.seed = 2;
    const EnergyNet net = EnergyNet::init(cfg);
    Rng rng(6);
    const Tensor x = testutil::uniform_tensor({3, 2}, rng);
    const std::vector<Tensor> params(net.params().begin(), net.params().end());
    const ad::TapeFunction f = [&](ad::Tape& t, std::span<const ad::Var> p) {
        return ad::sum(net.energy(p, t.constant(x)));
    };
    EXPECT_LE(ad::finite_diff_check(f, params, 1e-5), 1e-7);
}

TEST(EnergyNet, EnergyAndGradConsistent) {
    NetConfig cfg;
    cfg.hidden_dims = {8};
    const EnergyNet net = EnergyNet::init(cfg);
    Rng rng(8);
    const Tensor x = testutil::uniform_tensor({7, 2}, rng);
    const EnergyAndGrad both = net.energy_and_grad(x);
    EXPECT_TRUE(both.energy.bit_equal(net.energy(x)));
    EXPECT_TRUE(both.grad.bit_equal(net.energy_grad(x)));
}

TEST(EnergyNet, QuadraticInHiddenWhenProductTermOff) {
    // a = c = 0 leaves E = d.(h*h) + b1 b2 + b3 exactly.
    NetConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden_dims = {};
    EnergyNet net = EnergyNet::init(cfg);
    auto p = net.mutable_params();
    for (double& v : p[0].data()) v = 0.0;
    for (double& v : p[1].data()) v = 0.0;
    p[2][0] = 2.0;
    p[2][1] = 0.5;
    p[3][0] = 1.5;
    p[4][0] = 2.0;
    p[5][0] = -1.0;
    const Tensor e = net.energy(Tensor::matrix({{1.0, 2.0}, {-3.0, 0.0}}));
    EXPECT_EQ(e[0], 2.0 + 2.0 + 3.0 - 1.0);
    EXPECT_EQ(e[1], 18.0 + 3.0 - 1.0);
}

TEST(EnergyNet, RescaledIsExactForPowersOfTwo) {
    NetConfig cfg;
    cfg.hidden_dims = {16, 16};
    cfg.seed = 9;
    const EnergyNet net = EnergyNet::init(cfg);
    Rng rng(10);
    const Tensor x = testutil::uniform_tensor({9, 2}, rng);
    const Tensor e = net.energy(x);
    const Tensor g = net.energy_grad(x);
    for (double alpha : {0.5, 2.0, 4.0}) {
        const EnergyNet r = net.rescaled(alpha);
        const Tensor er = r.energy(x);
        const Tensor gr = r.energy_grad(x);
        for (std::size_t i = 0; i < e.numel(); ++i) EXPECT_EQ(er[i], e[i] / (alpha * alpha));
        for (std::size_t i = 0; i < g.numel(); ++i) EXPECT_EQ(gr[i], g[i] / (alpha * alpha));
    }
    EXPECT_THROW((void)net.rescaled(0.0), DomainError);
}

TEST(ClosedFormEnergies, QuadraticAndConstant) {
    const QuadraticEnergy q(Tensor::vector({1.0, -1.0}), 2.0);
    const Tensor x = Tensor::matrix({{1.0, -1.0}, {3.0, -1.0}});
    const Tensor e = q.energy(x);
    EXPECT_EQ(e[0], 0.0);
    EXPECT_EQ(e[1], 0.5);
    EXPECT_EQ(q.energy_grad(x).at(1, 0), 0.5);
    EXPECT_NEAR(q.log_partition(), std::log(2 * M_PI * 4.0), 1e-14);
    const ConstantEnergy c(2, 4.0);
    EXPECT_EQ(c.energy(x)[1], 4.0);
    const ScaledEnergy s(q, 0.25);
    EXPECT_EQ(s.energy(x)[1], 0.125);
    EXPECT_THROW(QuadraticEnergy(Tensor::vector({0.0}), 0.0), DomainError);
}
