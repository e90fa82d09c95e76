#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mdsm/tape.hpp"

namespace mdsm::ad {

// A scalar function recorded on a tape from leaf inputs.
using TapeFunction = std::function<Var(Tape&, std::span<const Var>)>;

// Compares tape gradients of f at `inputs` against central differences with
// step h. Returns max over all coordinates of
//   |analytic - numeric| / max(|analytic|, 1e-8).
// Throws DomainError for h <= 0 or when f evaluates to a non-finite value.
double finite_diff_check(const TapeFunction& f, std::span<const Tensor> inputs, double h);

// Single-input convenience overload.
double finite_diff_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x, double h);

// Scalar value of f on a fresh tape.
double evaluate(const TapeFunction& f, std::span<const Tensor> inputs);

}  // namespace mdsm::ad
