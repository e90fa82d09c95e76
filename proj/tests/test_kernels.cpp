#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "mdsm/error.hpp"
#include "mdsm/kernels.hpp"
#include "mdsm/rng.hpp"
#include "mdsm/tensor.hpp"
#include "mdsm/tape.hpp"
#include "test_util.hpp"

using namespace mdsm;
using kernels::Isa;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    rng.fill_normal(v);
    return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

class KernelEquivalence : public ::testing::Test {
protected:
    void SetUp() override {
        if (!kernels::supported(Isa::Avx2)) GTEST_SKIP() << "AVX2 not available on this CPU";
    }
    const kernels::KernelTable& ref = kernels::table(Isa::Scalar);
    const kernels::KernelTable& simd() { return kernels::table(Isa::Avx2); }
};

// Lengths straddle the 4- and 8-lane boundaries and include tails.
constexpr std::size_t kLengths[] = {0, 1, 3, 4, 5, 7, 8, 9, 15, 16, 17, 63, 64, 65, 1000, 1027};

}  // namespace

TEST(Dispatch, ParseAndNames) {
    EXPECT_EQ(kernels::parse_isa("scalar"), Isa::Scalar);
    EXPECT_EQ(kernels::parse_isa("avx2"), Isa::Avx2);
    EXPECT_THROW((void)kernels::parse_isa("neon9"), ConfigError);
    EXPECT_EQ(kernels::isa_name(Isa::Scalar), "scalar");
    EXPECT_TRUE(kernels::supported(Isa::Scalar));
}

TEST(Dispatch, ScopedIsaRestores) {
    const Isa before = kernels::active().isa;
    {
        kernels::ScopedIsa scoped(Isa::Scalar);
        EXPECT_EQ(kernels::active().isa, Isa::Scalar);
    }
    EXPECT_EQ(kernels::active().isa, before);
}

TEST(ScalarKernels, SmallGemm) {
    const auto& k = kernels::table(Isa::Scalar);
    const double a[] = {1, 2, 3, 4};
    const double b[] = {5, 6, 7, 8};
    double c[4] = {};
    k.gemm(false, 2, 2, 2, a, b, c);
    EXPECT_EQ(c[0], 19);
    EXPECT_EQ(c[1], 22);
    EXPECT_EQ(c[2], 43);
    EXPECT_EQ(c[3], 50);
    k.gemm(true, 2, 2, 2, a, b, c);  // a^T b
    EXPECT_EQ(c[0], 26);
    EXPECT_EQ(c[1], 30);
    EXPECT_EQ(c[2], 38);
    EXPECT_EQ(c[3], 44);
}

TEST(ScalarKernels, AllFinite) {
    const auto& k = kernels::table(Isa::Scalar);
    const double ok[] = {1.0, -2.0, 0.0};
    const double bad[] = {1.0, std::numeric_limits<double>::quiet_NaN()};
    const double inf[] = {std::numeric_limits<double>::infinity()};
    EXPECT_TRUE(k.all_finite(ok, 3));
    EXPECT_FALSE(k.all_finite(bad, 2));
    EXPECT_FALSE(k.all_finite(inf, 1));
}

TEST_F(KernelEquivalence, ElementwiseBitIdentical) {
    Rng rng(1);
    for (std::size_t n : kLengths) {
        const auto a = random_vec(n, rng);
        auto b = random_vec(n, rng);
        for (double& v : b)
            if (v == 0.0) v = 1.0;
        using Bin = void (*)(const double*, const double*, double*, std::size_t);
        const std::pair<Bin, Bin> ops[] = {{ref.add, simd().add}, {ref.sub, simd().sub},
                                           {ref.mul, simd().mul}, {ref.div, simd().div}};
        for (const auto& [r, s] : ops) {
            std::vector<double> out_r(n), out_s(n);
            r(a.data(), b.data(), out_r.data(), n);
            s(a.data(), b.data(), out_s.data(), n);
            EXPECT_TRUE(same_bits(out_r, out_s)) << "n=" << n;
        }
        std::vector<double> out_r(n), out_s(n);
        ref.scale(a.data(), -0.37, out_r.data(), n);
        simd().scale(a.data(), -0.37, out_s.data(), n);
        EXPECT_TRUE(same_bits(out_r, out_s));
        ref.square(a.data(), out_r.data(), n);
        simd().square(a.data(), out_s.data(), n);
        EXPECT_TRUE(same_bits(out_r, out_s));
        std::vector<double> y_r = b, y_s = b;
        ref.axpy(1.3, a.data(), y_r.data(), n);
        simd().axpy(1.3, a.data(), y_s.data(), n);
        EXPECT_TRUE(same_bits(y_r, y_s));
        EXPECT_EQ(ref.all_finite(a.data(), n), simd().all_finite(a.data(), n));
    }
}

TEST_F(KernelEquivalence, AllFiniteDetectsEveryPosition) {
    for (std::size_t n : {1u, 5u, 8u, 13u}) {
        for (std::size_t pos = 0; pos < n; ++pos) {
            std::vector<double> v(n, 1.0);
            v[pos] = std::numeric_limits<double>::quiet_NaN();
            EXPECT_FALSE(simd().all_finite(v.data(), n));
            v[pos] = -std::numeric_limits<double>::infinity();
            EXPECT_FALSE(simd().all_finite(v.data(), n));
        }
    }
}

TEST_F(KernelEquivalence, ReductionsAgreeToRounding) {
    Rng rng(2);
    for (std::size_t n : kLengths) {
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);
        double abs_sum = 0.0, abs_dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            abs_sum += std::abs(a[i]);
            abs_dot += std::abs(a[i] * b[i]);
        }
        const double tol = 1e-14;
        EXPECT_NEAR(ref.sum(a.data(), n), simd().sum(a.data(), n), tol * (abs_sum + 1.0)) << n;
        EXPECT_NEAR(ref.dot(a.data(), b.data(), n), simd().dot(a.data(), b.data(), n), tol * (abs_dot + 1.0)) << n;
    }
}

TEST_F(KernelEquivalence, GemmAgreesToRounding) {
    Rng rng(3);
    const std::size_t dims[] = {1, 2, 3, 4, 5, 7, 8, 9, 13, 16, 31, 64, 129};
    for (std::size_t m : dims) {
        for (std::size_t n : dims) {
            for (std::size_t k : {1u, 2u, 7u, 32u, 65u}) {
                for (bool ta : {false, true}) {
                    const auto a = random_vec(m * k, rng);
                    const auto b = random_vec(k * n, rng);
                    std::vector<double> c_r(m * n, 99.0), c_s(m * n, -99.0);
                    ref.gemm(ta, m, n, k, a.data(), b.data(), c_r.data());
                    simd().gemm(ta, m, n, k, a.data(), b.data(), c_s.data());
                    // Bound by the sum of |a_ip b_pj| for each entry.
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < n; ++j) {
                            double mag = 0.0;
                            for (std::size_t p = 0; p < k; ++p) {
                                const double aip = ta ? a[p * m + i] : a[i * k + p];
                                mag += std::abs(aip * b[p * n + j]);
                            }
                            ASSERT_NEAR(c_r[i * n + j], c_s[i * n + j], 1e-14 * (mag + 1.0))
                                << m << "x" << n << "x" << k << " ta=" << ta;
                        }
                    }
                }
            }
        }
    }
}

TEST_F(KernelEquivalence, MatmulAllTransposes) {
    Rng rng(4);
    const std::size_t m = 7, n = 11, k = 5;
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    // Naive oracle on explicit transposes.
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            std::vector<double> expect(m * n, 0.0);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = ta ? a[p * m + i] : a[i * k + p];
                        const double bv = tb ? b[j * k + p] : b[p * n + j];
                        expect[i * n + j] += av * bv;
                    }
            for (Isa isa : {Isa::Scalar, Isa::Avx2}) {
                kernels::ScopedIsa scoped(isa);
                std::vector<double> c(m * n);
                kernels::matmul(ta, tb, m, n, k, a.data(), b.data(), c.data());
                for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], expect[i], 1e-12);
            }
        }
    }
}

TEST_F(KernelEquivalence, AutodiffGradientsAgreeAcrossIsa) {
    auto run = [](Isa isa) {
        kernels::ScopedIsa scoped(isa);
        Rng rng(9);
        ad::Tape t;
        const ad::Var x = t.variable(testutil::uniform_tensor({16, 2}, rng));
        const ad::Var w = t.variable(testutil::uniform_tensor({2, 32}, rng));
        const ad::Var v = t.variable(testutil::uniform_tensor({32, 1}, rng));
        const ad::Var y = ad::sum(ad::matmul(ad::elu(ad::matmul(x, w)), v));
        const std::vector<ad::Var> wrt{x, w, v};
        std::vector<Tensor> out;
        for (const auto& g : t.grad(y, wrt)) out.push_back(g.value());
        return out;
    };
    const auto s = run(Isa::Scalar);
    const auto a = run(Isa::Avx2);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_LT(testutil::max_abs_diff(s[i], a[i]), 1e-12);
}
