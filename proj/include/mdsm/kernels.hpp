#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by the tensor and autodiff layers.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active table is chosen once at first use (best ISA
// the CPU reports, overridable with MDSM_ISA=scalar|avx2) and can be switched
// explicitly for equivalence testing.
//
// Elementwise kernels are bit-identical across ISAs. gemm, sum and dot are
// not: gemm fuses multiply-add and the reductions use lane-parallel partial
// sums, so results agree to rounding only.
namespace mdsm::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    Isa isa;
    std::string_view name;

    // c[m,n] = op(a)[m,k] * b[k,n]; op(a) = a^T (a stored [k,m]) when
    // trans_a. c is overwritten.
    void (*gemm)(bool trans_a, std::size_t m, std::size_t n, std::size_t k,
                 const double* a, const double* b, double* c);

    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*div)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(const double* a, double c, double* out, std::size_t n);
    void (*square)(const double* a, double* out, std::size_t n);
    // y += alpha * x, computed as a separate multiply and add.
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    double (*sum)(const double* a, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    bool (*all_finite)(const double* a, std::size_t n);
};

[[nodiscard]] bool supported(Isa isa) noexcept;
[[nodiscard]] Isa best_supported() noexcept;

// Throws ConfigError when the CPU cannot run the requested table.
[[nodiscard]] const KernelTable& table(Isa isa);
[[nodiscard]] const KernelTable& active();
void select(Isa isa);

[[nodiscard]] std::string_view isa_name(Isa isa) noexcept;
[[nodiscard]] Isa parse_isa(std::string_view name);

// Full matrix product with optional transposes on either side. Handles the
// trans_b case by packing b, then dispatches to the active gemm.
void matmul(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
            const double* a, const double* b, double* c);

// Scoped override, restores the previous table on destruction.
class ScopedIsa {
public:
    explicit ScopedIsa(Isa isa);
    ~ScopedIsa();
    ScopedIsa(const ScopedIsa&) = delete;
    ScopedIsa& operator=(const ScopedIsa&) = delete;

private:
    Isa previous_;
};

namespace detail {
const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept;  // nullptr when not compiled in
}  // namespace detail

}  // namespace mdsm::kernels
