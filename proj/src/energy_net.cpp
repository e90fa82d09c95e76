#include "mdsm/energy_net.hpp"

#include <cmath>

#include "mdsm/error.hpp"
#include "mdsm/rng.hpp"

namespace mdsm {

void NetConfig::validate() const {
    if (input_dim < 1) throw ConfigError("energy-net", "input_dim must be >= 1");
    for (std::size_t h : hidden_dims) {
        if (h < 1) throw ConfigError("energy-net", "hidden widths must be >= 1");
    }
}

std::vector<std::string> EnergyNet::param_names(const NetConfig& config) {
    std::vector<std::string> names;
    for (std::size_t l = 0; l < config.hidden_dims.size(); ++l) {
        names.push_back("trunk." + std::to_string(l) + ".weight");
        names.push_back("trunk." + std::to_string(l) + ".bias");
    }
    for (const char* n : {"head.a", "head.c", "head.d", "head.b1", "head.b2", "head.b3"}) names.emplace_back(n);
    return names;
}

std::vector<Shape> EnergyNet::param_shapes(const NetConfig& config) {
    std::vector<Shape> shapes;
    std::size_t fan_in = config.input_dim;
    for (std::size_t h : config.hidden_dims) {
        shapes.push_back({fan_in, h});
        shapes.push_back({h});
        fan_in = h;
    }
    const std::size_t w = config.width();
    shapes.insert(shapes.end(), {{w}, {w}, {w}, {1}, {1}, {1}});
    return shapes;
}

std::size_t EnergyNet::param_count(const NetConfig& config) {
    std::size_t total = 0;
    for (const Shape& s : param_shapes(config)) total += shape_numel(s);
    return total;
}

EnergyNet::EnergyNet(NetConfig config, std::vector<Tensor> params)
    : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
    const std::vector<Shape> shapes = param_shapes(config_);
    if (shapes.size() != params_.size()) {
        throw DimensionError("energy-net", "expected " + std::to_string(shapes.size()) + " parameter tensors, got " +
                                               std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (params_[i].shape() != shapes[i]) {
            throw DimensionError("energy-net", "parameter " + std::to_string(i) + " has shape " +
                                                   shape_string(params_[i].shape()) + ", expected " +
                                                   shape_string(shapes[i]));
        }
    }
}

EnergyNet EnergyNet::init(const NetConfig& config) {
    config.validate();
    Rng rng(config.seed);
    std::vector<Tensor> params;
    std::size_t fan_in = config.input_dim;
    for (std::size_t h : config.hidden_dims) {
        Tensor w({fan_in, h});
        rng.fill_normal(w.data(), 0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        params.push_back(std::move(w));
        params.push_back(Tensor::zeros({h}));
        fan_in = h;
    }
    const std::size_t width = config.width();
    for (int k = 0; k < 3; ++k) {
        Tensor v({width});
        rng.fill_normal(v.data(), 0.0, std::sqrt(1.0 / static_cast<double>(width)));
        params.push_back(std::move(v));
    }
    for (int k = 0; k < 3; ++k) params.push_back(Tensor::zeros({1}));
    return EnergyNet(config, std::move(params));
}

EnergyNet EnergyNet::rescaled(double alpha) const {
    if (!(alpha > 0.0)) throw DomainError("energy-net", "rescale factor must be positive");
    std::vector<Tensor> p = params_;
    const std::size_t o = head_offset();
    const double inv = 1.0 / alpha;
    const double inv_sq = inv * inv;
    for (std::size_t k : {o, o + 1, o + 3, o + 4}) {
        for (double& v : p[k].data()) v *= inv;
    }
    for (std::size_t k : {o + 2, o + 5}) {
        for (double& v : p[k].data()) v *= inv_sq;
    }
    return EnergyNet(config_, std::move(p));
}

std::vector<ad::Var> EnergyNet::bind(ad::Tape& tape, bool trainable) const {
    std::vector<ad::Var> vars;
    vars.reserve(params_.size());
    for (const Tensor& p : params_) vars.push_back(trainable ? tape.variable(p) : tape.constant(p));
    return vars;
}

ad::Var EnergyNet::energy(std::span<const ad::Var> params, const ad::Var& x) const {
    const Shape& xs = x.shape();
    if (xs.size() != 2 || xs[1] != config_.input_dim) {
        throw DimensionError("energy-net", "expected input [B," + std::to_string(config_.input_dim) + "], got " +
                                               shape_string(xs));
    }
    const std::size_t batch = xs[0];
    ad::Var h = x;
    const std::size_t layers = config_.hidden_dims.size();
    for (std::size_t l = 0; l < layers; ++l) {
        h = ad::elu(ad::add(ad::matmul(h, params[2 * l]), params[2 * l + 1]));
    }
    const std::size_t width = config_.width();
    const std::size_t o = head_offset();
    const ad::Var a = ad::reshape(params[o], {width, 1});
    const ad::Var c = ad::reshape(params[o + 1], {width, 1});
    const ad::Var d = ad::reshape(params[o + 2], {width, 1});
    const ad::Var left = ad::add(ad::matmul(h, a), params[o + 3]);
    const ad::Var right = ad::add(ad::matmul(h, c), params[o + 4]);
    const ad::Var quad = ad::matmul(ad::square(h), d);
    const ad::Var out = ad::add(ad::add(ad::mul(left, right), quad), params[o + 5]);
    return ad::reshape(out, {batch});
}

Tensor EnergyNet::energy(const Tensor& x) const {
    check_input(x, "energy-net");
    ad::Tape tape;
    const std::vector<ad::Var> p = bind(tape, false);
    return energy(p, tape.constant(x)).value();
}

Tensor EnergyNet::energy_grad(const Tensor& x) const { return energy_and_grad(x).grad; }

EnergyAndGrad EnergyNet::energy_and_grad(const Tensor& x) const {
    check_input(x, "energy-net");
    ad::Tape tape;
    const std::vector<ad::Var> p = bind(tape, false);
    const ad::Var xv = tape.variable(x);
    const ad::Var e = energy(p, xv);
    const ad::Var total = ad::sum(e);
    const std::vector<ad::Var> wrt{xv};
    const std::vector<ad::Var> g = tape.grad(total, wrt);
    return {e.value(), g[0].value()};
}

}  // namespace mdsm
