#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdsm/energy_model.hpp"
#include "mdsm/tape.hpp"

namespace mdsm {

struct NetConfig {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden_dims{128, 128};
    std::uint64_t seed = 0;

    // Throws ConfigError.
    void validate() const;
    [[nodiscard]] std::size_t width() const noexcept {
        return hidden_dims.empty() ? input_dim : hidden_dims.back();
    }
};

// ELU multilayer perceptron with a generalised quadratic output layer:
//
//   E(x) = (a.h + b1)(c.h + b2) + d.(h*h) + b3
//
// where h is the last hidden activation (or x itself when hidden_dims is
// empty). Parameters are stored in a fixed order: per trunk layer a weight
// [in,out] and bias [out], then a, c, d ([width]) and b1, b2, b3 ([1]).
class EnergyNet final : public EnergyModel {
public:
    EnergyNet(NetConfig config, std::vector<Tensor> params);

    // Trunk weights ~ N(0, 2/fan_in), trunk biases 0, head a,c,d ~ N(0, 1/width),
    // b1 = b2 = b3 = 0. Deterministic in config.seed.
    static EnergyNet init(const NetConfig& config);

    static std::vector<std::string> param_names(const NetConfig& config);
    static std::vector<Shape> param_shapes(const NetConfig& config);
    static std::size_t param_count(const NetConfig& config);

    [[nodiscard]] const NetConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::span<const Tensor> params() const noexcept { return params_; }
    [[nodiscard]] std::span<Tensor> mutable_params() noexcept { return params_; }
    [[nodiscard]] std::size_t param_count() const noexcept { return param_count(config_); }

    // Index of the first head parameter (a); b1..b3 follow c and d.
    [[nodiscard]] std::size_t head_offset() const noexcept { return 2 * config_.hidden_dims.size(); }

    // The network with energy E / alpha^2: a, b1, c, b2 divided by alpha and
    // d, b3 by alpha^2. Exact for power-of-two alpha.
    [[nodiscard]] EnergyNet rescaled(double alpha) const;

    // Records the parameters onto a tape; as variables when trainable.
    [[nodiscard]] std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const;

    // Energy [B] of x [B,d] on a tape, from previously bound parameters.
    [[nodiscard]] ad::Var energy(std::span<const ad::Var> params, const ad::Var& x) const;

    [[nodiscard]] std::size_t dim() const override { return config_.input_dim; }
    [[nodiscard]] Tensor energy(const Tensor& x) const override;
    [[nodiscard]] Tensor energy_grad(const Tensor& x) const override;
    [[nodiscard]] EnergyAndGrad energy_and_grad(const Tensor& x) const override;

private:
    NetConfig config_;
    std::vector<Tensor> params_;
};

}  // namespace mdsm
