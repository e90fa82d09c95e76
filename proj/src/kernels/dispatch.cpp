#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

#include "mdsm/error.hpp"
#include "mdsm/kernels.hpp"

namespace mdsm::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa initial_isa() {
    if (const char* env = std::getenv("MDSM_ISA"); env != nullptr && *env != '\0') {
        const Isa requested = parse_isa(env);
        if (supported(requested)) return requested;
    }
    return best_supported();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table_ptr{&table(initial_isa())};
    return table_ptr;
}

}  // namespace

bool supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar:
            return true;
        case Isa::Avx2:
            return detail::avx2_table() != nullptr && cpu_has_avx2();
    }
    return false;
}

Isa best_supported() noexcept { return supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar; }

const KernelTable& table(Isa isa) {
    if (!supported(isa)) {
        throw ConfigError("kernels", "ISA '" + std::string(isa_name(isa)) + "' not supported on this CPU");
    }
    return isa == Isa::Avx2 ? *detail::avx2_table() : detail::scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

std::string_view isa_name(Isa isa) noexcept {
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::Scalar;
    if (name == "avx2") return Isa::Avx2;
    throw ConfigError("kernels", "unknown ISA '" + std::string(name) + "'");
}

void matmul(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
            const double* a, const double* b, double* c) {
    const KernelTable& kt = active();
    if (!trans_b) {
        kt.gemm(trans_a, m, n, k, a, b, c);
        return;
    }
    // b is stored [n,k]; pack to [k,n].
    thread_local std::vector<double> packed;
    packed.resize(k * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t p = 0; p < k; ++p) packed[p * n + j] = b[j * k + p];
    }
    kt.gemm(trans_a, m, n, k, a, packed.data(), c);
}

ScopedIsa::ScopedIsa(Isa isa) : previous_(active().isa) { select(isa); }
ScopedIsa::~ScopedIsa() { select(previous_); }

}  // namespace mdsm::kernels
