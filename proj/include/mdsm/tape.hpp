#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "mdsm/tensor.hpp"

// Reverse-mode automatic differentiation on an append-only tape.
//
// Nodes are appended in evaluation order, so the tape is always topologically
// sorted and a reverse sweep visits each node once. Backward rules are written
// with the same differentiable ops as the forward pass; with create_graph set,
// grad() records the backward sweep onto the tape and the returned gradients
// can be differentiated again (double backpropagation).
//
// A tape is a single-threaded unit of work. Recorded values never change.
namespace mdsm::ad {

class Tape;

class Var {
public:
    Var() = default;

    [[nodiscard]] bool valid() const noexcept { return tape_ != nullptr; }
    [[nodiscard]] Tape* tape() const noexcept { return tape_; }
    [[nodiscard]] std::uint32_t id() const noexcept { return id_; }
    [[nodiscard]] const Tensor& value() const;
    [[nodiscard]] const Shape& shape() const { return value().shape(); }

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

enum class OpKind : std::uint8_t {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Scale,
    MatMul,
    Sum,
    SumAxis,
    Expand,
    BroadcastAxis,
    Square,
    Sqrt,
    Exp,
    Log,
    Elu,
    EluDeriv,
    Reshape,
    Slice,
    Concat,
};

struct Node {
    OpKind kind = OpKind::Constant;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    double scalar = 0.0;        // Scale factor
    std::size_t axis = 0;       // SumAxis, BroadcastAxis, Slice, Concat
    std::size_t begin = 0;      // Slice
    std::size_t end = 0;        // Slice
    int order = 0;              // EluDeriv
    bool trans_a = false;       // MatMul
    bool trans_b = false;       // MatMul
    bool broadcast_rhs = false; // binary ops with rhs repeated over the leading dim
};

class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf that gradients may be taken with respect to.
    Var variable(Tensor value);
    Var constant(Tensor value);

    // d(output)/d(wrt[i]) for a one-element output. With create_graph the
    // sweep is recorded and the results are differentiable; otherwise they
    // are constants. A wrt entry the output does not depend on gets zeros.
    // Throws GraphError if output or any wrt entry belongs to another tape.
    std::vector<Var> grad(const Var& output, std::span<const Var> wrt, bool create_graph = false);

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] const Node& node(std::uint32_t id) const { return nodes_.at(id); }
    [[nodiscard]] bool recording() const noexcept { return recording_; }

    // Used by the op functions; not part of the user-facing surface.
    Var push(Node node);
    void check_owned(const Var& v, const char* what) const;

private:
    void backward_node(std::uint32_t id, const Var& g, const std::vector<char>& relevant,
                       std::vector<Var>& adjoint);

    // std::deque keeps references to existing nodes stable while the backward
    // sweep appends new ones.
    std::deque<Node> nodes_;
    bool recording_ = true;
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var sum(const Var& a);
Var sum_axis(const Var& a, std::size_t axis);
Var mean(const Var& a);
Var expand(const Var& scalar, Shape shape);
Var broadcast_axis(const Var& a, std::size_t axis, std::size_t n);
Var square(const Var& a);
Var sqrt(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var elu(const Var& a);
// order-th derivative of ELU, order >= 1.
Var elu_deriv(const Var& a, int order);
Var reshape(const Var& a, Shape shape);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(std::span<const Var> parts, std::size_t axis);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

}  // namespace mdsm::ad
