#include "mdsm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mdsm/error.hpp"

namespace mdsm::ad {

double evaluate(const TapeFunction& f, std::span<const Tensor> inputs) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
    double value = 0.0;
    try {
        value = f(tape, vars).value().item();
    } catch (const NumericError& e) {
        throw DomainError("gradcheck", std::string("function evaluation failed: ") + e.what());
    }
    if (!std::isfinite(value)) throw DomainError("gradcheck", "function evaluated to a non-finite value");
    return value;
}

double finite_diff_check(const TapeFunction& f, std::span<const Tensor> inputs, double h) {
    if (!(h > 0.0)) throw DomainError("gradcheck", "step h must be positive");
    if (inputs.empty()) throw DomainError("gradcheck", "no inputs to check");

    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
        Var y = vars.front();
        try {
            y = f(tape, vars);
        } catch (const NumericError& e) {
            throw DomainError("gradcheck", std::string("function evaluation failed: ") + e.what());
        }
        if (!std::isfinite(y.value().item())) throw DomainError("gradcheck", "non-finite function value");
        for (const Var& g : tape.grad(y, vars)) analytic.push_back(g.value());
    }

    std::vector<Tensor> probe(inputs.begin(), inputs.end());
    double worst = 0.0;
    for (std::size_t k = 0; k < probe.size(); ++k) {
        for (std::size_t i = 0; i < probe[k].numel(); ++i) {
            const double saved = probe[k][i];
            probe[k][i] = saved + h;
            const double plus = evaluate(f, probe);
            probe[k][i] = saved - h;
            const double minus = evaluate(f, probe);
            probe[k][i] = saved;
            const double numeric = (plus - minus) / (2.0 * h);
            const double a = analytic[k][i];
            worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a), 1e-8));
        }
    }
    return worst;
}

double finite_diff_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x, double h) {
    const TapeFunction wrapped = [&f](Tape& t, std::span<const Var> v) { return f(t, v[0]); };
    const Tensor inputs[] = {x};
    return finite_diff_check(wrapped, inputs, h);
}

}  // namespace mdsm::ad
