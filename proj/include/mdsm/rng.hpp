#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mdsm {

// Seeded random stream. Identical seeds produce identical draw sequences on
// a given standard library; nothing in the toolkit reads global randomness.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::size_t index(std::size_t n);
    std::uint64_t next_u64() { return engine_(); }

    void fill_normal(std::span<double> out, double mean = 0.0, double stddev = 1.0);

    // Independent stream for worker/chain `stream`, derived from this
    // generator's seed only, so it does not depend on how many draws were made.
    [[nodiscard]] Rng derive(std::uint64_t stream) const;

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace mdsm
