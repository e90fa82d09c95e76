// AVX2+FMA variants. Functions carry a target attribute instead of building
// the whole translation unit with -mavx2, so no inline library code compiled
// for AVX2 can leak into the scalar path through ODR merging.

#include "mdsm/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))

#include <immintrin.h>

#include <cmath>

#define MDSM_AVX2 __attribute__((target("avx2,fma")))

namespace mdsm::kernels::detail {
namespace {

// 4x8 register-blocked micro kernel. Each c element accumulates over p in
// increasing order, the same order as the scalar reference.
MDSM_AVX2 void gemm(bool trans_a, std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
    auto at = [&](std::size_t i, std::size_t p) {
        return trans_a ? a[p * m + i] : a[i * k + p];
    };
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
            __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
            __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
            __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                const double* brow = b + p * n + j;
                const __m256d b0 = _mm256_loadu_pd(brow);
                const __m256d b1 = _mm256_loadu_pd(brow + 4);
                __m256d av = _mm256_set1_pd(at(i, p));
                c00 = _mm256_fmadd_pd(av, b0, c00);
                c01 = _mm256_fmadd_pd(av, b1, c01);
                av = _mm256_set1_pd(at(i + 1, p));
                c10 = _mm256_fmadd_pd(av, b0, c10);
                c11 = _mm256_fmadd_pd(av, b1, c11);
                av = _mm256_set1_pd(at(i + 2, p));
                c20 = _mm256_fmadd_pd(av, b0, c20);
                c21 = _mm256_fmadd_pd(av, b1, c21);
                av = _mm256_set1_pd(at(i + 3, p));
                c30 = _mm256_fmadd_pd(av, b0, c30);
                c31 = _mm256_fmadd_pd(av, b1, c31);
            }
            _mm256_storeu_pd(c + i * n + j, c00);
            _mm256_storeu_pd(c + i * n + j + 4, c01);
            _mm256_storeu_pd(c + (i + 1) * n + j, c10);
            _mm256_storeu_pd(c + (i + 1) * n + j + 4, c11);
            _mm256_storeu_pd(c + (i + 2) * n + j, c20);
            _mm256_storeu_pd(c + (i + 2) * n + j + 4, c21);
            _mm256_storeu_pd(c + (i + 3) * n + j, c30);
            _mm256_storeu_pd(c + (i + 3) * n + j + 4, c31);
        }
        for (; j < n; ++j) {
            for (std::size_t r = 0; r < 4; ++r) {
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc = std::fma(at(i + r, p), b[p * n + j], acc);
                c[(i + r) * n + j] = acc;
            }
        }
    }
    for (; i < m; ++i) {
        double* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                acc = _mm256_fmadd_pd(_mm256_set1_pd(at(i, p)), _mm256_loadu_pd(b + p * n + j), acc);
            }
            _mm256_storeu_pd(crow + j, acc);
        }
        for (; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc = std::fma(at(i, p), b[p * n + j], acc);
            crow[j] = acc;
        }
    }
}

#define MDSM_BINARY(name, vop, sop)                                                 \
    MDSM_AVX2 void name(const double* a, const double* b, double* out, std::size_t n) { \
        std::size_t i = 0;                                                          \
        for (; i + 4 <= n; i += 4) {                                                \
            _mm256_storeu_pd(out + i, vop(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i))); \
        }                                                                           \
        for (; i < n; ++i) out[i] = a[i] sop b[i];                                  \
    }

MDSM_BINARY(add, _mm256_add_pd, +)
MDSM_BINARY(sub, _mm256_sub_pd, -)
MDSM_BINARY(mul, _mm256_mul_pd, *)
MDSM_BINARY(div, _mm256_div_pd, /)

#undef MDSM_BINARY

MDSM_AVX2 void scale(const double* a, double c, double* out, std::size_t n) {
    const __m256d cv = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), cv));
    for (; i < n; ++i) out[i] = a[i] * c;
}

MDSM_AVX2 void square(const double* a, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(a + i);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(v, v));
    }
    for (; i < n; ++i) out[i] = a[i] * a[i];
}

MDSM_AVX2 void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

MDSM_AVX2 double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

MDSM_AVX2 double sum(const double* a, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i];
    return s;
}

MDSM_AVX2 double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s = std::fma(a[i], b[i], s);
    return s;
}

// x - x is 0 for finite x and NaN otherwise.
MDSM_AVX2 bool all_finite(const double* a, std::size_t n) {
    std::size_t i = 0;
    const __m256d zero = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(a + i);
        const __m256d ok = _mm256_cmp_pd(_mm256_sub_pd(v, v), zero, _CMP_EQ_OQ);
        if (_mm256_movemask_pd(ok) != 0xF) return false;
    }
    for (; i < n; ++i) {
        if (!std::isfinite(a[i])) return false;
    }
    return true;
}

constexpr KernelTable kAvx2{
    Isa::Avx2, "avx2", gemm, add, sub, mul, div, scale, square, axpy, sum, dot, all_finite,
};

}  // namespace

const KernelTable* avx2_table() noexcept { return &kAvx2; }

}  // namespace mdsm::kernels::detail

#else

namespace mdsm::kernels::detail {
const KernelTable* avx2_table() noexcept { return nullptr; }
}  // namespace mdsm::kernels::detail

#endif
