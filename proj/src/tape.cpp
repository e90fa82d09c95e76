#include "mdsm/tape.hpp"

#include <cmath>
#include <string>

#include "mdsm/error.hpp"
#include "mdsm/kernels.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mdsm::ad {
namespace {

constexpr const char* kModule = "autodiff";

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Constant: return "constant";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::Scale: return "scale";
        case OpKind::MatMul: return "matmul";
        case OpKind::Sum: return "sum";
        case OpKind::SumAxis: return "sum_axis";
        case OpKind::Expand: return "expand";
        case OpKind::BroadcastAxis: return "broadcast_axis";
        case OpKind::Square: return "square";
        case OpKind::Sqrt: return "sqrt";
        case OpKind::Exp: return "exp";
        case OpKind::Log: return "log";
        case OpKind::Elu: return "elu";
        case OpKind::EluDeriv: return "elu_deriv";
        case OpKind::Reshape: return "reshape";
        case OpKind::Slice: return "slice";
        case OpKind::Concat: return "concat";
    }
    return "?";
}

Tape& tape_of(const Var& a, const char* op) {
    if (!a.valid()) throw GraphError(kModule, std::string(op) + ": operand is not recorded on a tape");
    return *a.tape();
}

Tape& common_tape(const Var& a, const Var& b, const char* op) {
    Tape& t = tape_of(a, op);
    if (b.tape() != &t) throw GraphError(kModule, std::string(op) + ": operands live on different tapes");
    return t;
}

bool is_row_broadcast(const Shape& a, const Shape& b) {
    return !a.empty() && b.size() + 1 == a.size() && std::equal(b.begin(), b.end(), a.begin() + 1);
}

using BinaryKernel = void (*)(const double*, const double*, double*, std::size_t);

Var binary(OpKind kind, const Var& a, const Var& b, BinaryKernel kernel, const char* name) {
    Tape& t = common_tape(a, b, name);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Node n;
    n.kind = kind;
    n.inputs = {a.id(), b.id()};
    n.value = Tensor(av.shape());
    if (av.shape() == bv.shape()) {
        kernel(av.ptr(), bv.ptr(), n.value.ptr(), av.numel());
    } else if (is_row_broadcast(av.shape(), bv.shape())) {
        n.broadcast_rhs = true;
        const std::size_t width = bv.numel();
        const std::size_t rows = av.shape()[0];
        for (std::size_t r = 0; r < rows; ++r) {
            kernel(av.ptr() + r * width, bv.ptr(), n.value.ptr() + r * width, width);
        }
    } else {
        throw DimensionError(kModule, std::string(name) + ": shapes " + shape_string(av.shape()) + " and " +
                                          shape_string(bv.shape()) + " do not conform");
    }
    return t.push(std::move(n));
}

template <class F>
Var unary(OpKind kind, const Var& a, F&& f) {
    Tape& t = tape_of(a, op_name(kind));
    const Tensor& av = a.value();
    Node n;
    n.kind = kind;
    n.inputs = {a.id()};
    n.value = Tensor(av.shape());
    const double* src = av.ptr();
    double* dst = n.value.ptr();
    for (std::size_t i = 0; i < av.numel(); ++i) dst[i] = f(src[i]);
    return t.push(std::move(n));
}

// Views a tensor as [outer, dim(axis), inner] for axis-wise slicing.
struct AxisView {
    std::size_t outer = 1;
    std::size_t extent = 0;
    std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
    AxisView v;
    for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
    v.extent = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
    return v;
}

// Sums leading-dim rows of `g` back down to `target` shape (inverse of the
// row broadcast in binary ops).
Var reduce_rows(const Var& g, const Shape& target) {
    const std::size_t width = shape_numel(target);
    const std::size_t rows = g.value().numel() / width;
    return reshape(sum_axis(reshape(g, {rows, width}), 0), target);
}

// Tapes allocate and free many mid-sized buffers per step. glibc's default
// policy hands the top of the heap back to the kernel after each tape dies and
// page-faults it in again on the next one.
void tune_allocator() {
#if defined(__GLIBC__)
    static const bool once = [] {
        mallopt(M_TOP_PAD, 64 << 20);
        mallopt(M_TRIM_THRESHOLD, 256 << 20);
        mallopt(M_MMAP_THRESHOLD, 32 << 20);
        return true;
    }();
    (void)once;
#endif
}

}  // namespace

Tape::Tape() { tune_allocator(); }

const Tensor& Var::value() const {
    if (tape_ == nullptr) throw GraphError(kModule, "value() of an unrecorded Var");
    return tape_->node(id_).value;
}

Var Tape::variable(Tensor value) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::constant(Tensor value) {
    Node n;
    n.kind = OpKind::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::push(Node node) {
    if (!node.value.all_finite()) {
        throw NumericError(kModule, std::string("non-finite value produced by ") + op_name(node.kind));
    }
    if (!recording_ && node.kind != OpKind::Leaf) {
        node.kind = OpKind::Constant;
        node.inputs.clear();
    }
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::check_owned(const Var& v, const char* what) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
        throw GraphError(kModule, std::string(what) + " is not on this tape");
    }
}

std::vector<Var> Tape::grad(const Var& output, std::span<const Var> wrt, bool create_graph) {
    check_owned(output, "grad output");
    if (output.value().numel() != 1) {
        throw DimensionError(kModule, "grad output must have one element, got shape " +
                                          shape_string(output.shape()));
    }
    for (const Var& w : wrt) check_owned(w, "grad wrt tensor");

    const std::uint32_t top = output.id();
    std::vector<char> relevant(top + 1, 0);
    for (const Var& w : wrt) {
        if (w.id() <= top) relevant[w.id()] = 1;
    }
    for (std::uint32_t i = 0; i <= top; ++i) {
        if (relevant[i]) continue;
        for (std::uint32_t in : nodes_[i].inputs) {
            if (relevant[in]) {
                relevant[i] = 1;
                break;
            }
        }
    }

    const bool saved = recording_;
    recording_ = saved && create_graph;
    std::vector<Var> result;
    try {
        std::vector<Var> adjoint(top + 1);
        adjoint[top] = constant(Tensor::full(output.shape(), 1.0));
        for (std::uint32_t i = top + 1; i-- > 0;) {
            if (!relevant[i] || !adjoint[i].valid()) continue;
            const OpKind kind = nodes_[i].kind;
            if (kind == OpKind::Leaf || kind == OpKind::Constant) continue;
            const Var g = adjoint[i];
            backward_node(i, g, relevant, adjoint);
        }
        result.reserve(wrt.size());
        for (const Var& w : wrt) {
            if (w.id() <= top && adjoint[w.id()].valid()) {
                result.push_back(adjoint[w.id()]);
            } else {
                result.push_back(constant(Tensor::zeros(w.shape())));
            }
        }
    } catch (...) {
        recording_ = saved;
        throw;
    }
    recording_ = saved;
    return result;
}

void Tape::backward_node(std::uint32_t id, const Var& g, const std::vector<char>& relevant,
                         std::vector<Var>& adjoint) {
    // Copy what we need: appending nodes below must not alias this one.
    const Node& node = nodes_[id];
    const OpKind kind = node.kind;
    const std::vector<std::uint32_t> inputs = node.inputs;
    const double factor = node.scalar;
    const std::size_t axis = node.axis;
    const std::size_t begin = node.begin;
    const std::size_t end = node.end;
    const int order = node.order;
    const bool ta = node.trans_a;
    const bool tb = node.trans_b;
    const bool bcast = node.broadcast_rhs;
    const Var out(this, id);

    auto in = [&](std::size_t k) { return Var(this, inputs[k]); };
    auto needs = [&](std::size_t k) { return relevant[inputs[k]] != 0; };
    auto accumulate = [&](std::size_t k, const Var& contribution) {
        Var& slot = adjoint[inputs[k]];
        slot = slot.valid() ? add(slot, contribution) : contribution;
    };
    auto rhs_grad = [&](const Var& full) { return bcast ? reduce_rows(full, in(1).shape()) : full; };

    switch (kind) {
        case OpKind::Leaf:
        case OpKind::Constant:
            break;
        case OpKind::Add:
            if (needs(0)) accumulate(0, g);
            if (needs(1)) accumulate(1, rhs_grad(g));
            break;
        case OpKind::Sub:
            if (needs(0)) accumulate(0, g);
            if (needs(1)) accumulate(1, rhs_grad(scale(g, -1.0)));
            break;
        case OpKind::Mul:
            if (needs(0)) accumulate(0, mul(g, in(1)));
            if (needs(1)) accumulate(1, rhs_grad(mul(g, in(0))));
            break;
        case OpKind::Div:
            if (needs(0)) accumulate(0, div(g, in(1)));
            if (needs(1)) accumulate(1, rhs_grad(scale(div(mul(g, out), in(1)), -1.0)));
            break;
        case OpKind::Scale:
            if (needs(0)) accumulate(0, scale(g, factor));
            break;
        case OpKind::MatMul: {
            const Var a = in(0);
            const Var b = in(1);
            if (needs(0)) {
                Var ga;
                if (!ta && !tb) ga = matmul(g, b, false, true);
                else if (ta && !tb) ga = matmul(b, g, false, true);
                else if (!ta && tb) ga = matmul(g, b, false, false);
                else ga = matmul(b, g, true, true);
                accumulate(0, ga);
            }
            if (needs(1)) {
                Var gb;
                if (!ta && !tb) gb = matmul(a, g, true, false);
                else if (ta && !tb) gb = matmul(a, g, false, false);
                else if (!ta && tb) gb = matmul(g, a, true, false);
                else gb = matmul(g, a, true, true);
                accumulate(1, gb);
            }
            break;
        }
        case OpKind::Sum:
            if (needs(0)) accumulate(0, expand(g, in(0).shape()));
            break;
        case OpKind::SumAxis:
            if (needs(0)) accumulate(0, broadcast_axis(g, axis, in(0).shape()[axis]));
            break;
        case OpKind::Expand:
            if (needs(0)) accumulate(0, reshape(sum(g), in(0).shape()));
            break;
        case OpKind::BroadcastAxis:
            if (needs(0)) accumulate(0, sum_axis(g, axis));
            break;
        case OpKind::Square:
            if (needs(0)) accumulate(0, mul(g, scale(in(0), 2.0)));
            break;
        case OpKind::Sqrt:
            if (needs(0)) accumulate(0, div(scale(g, 0.5), out));
            break;
        case OpKind::Exp:
            if (needs(0)) accumulate(0, mul(g, out));
            break;
        case OpKind::Log:
            if (needs(0)) accumulate(0, div(g, in(0)));
            break;
        case OpKind::Elu:
            if (needs(0)) accumulate(0, mul(g, elu_deriv(in(0), 1)));
            break;
        case OpKind::EluDeriv:
            if (needs(0)) accumulate(0, mul(g, elu_deriv(in(0), order + 1)));
            break;
        case OpKind::Reshape:
            if (needs(0)) accumulate(0, reshape(g, in(0).shape()));
            break;
        case OpKind::Slice: {
            if (!needs(0)) break;
            const Shape& full = in(0).shape();
            std::vector<Var> parts;
            if (begin > 0) {
                Shape s = full;
                s[axis] = begin;
                parts.push_back(constant(Tensor::zeros(s)));
            }
            parts.push_back(g);
            if (end < full[axis]) {
                Shape s = full;
                s[axis] = full[axis] - end;
                parts.push_back(constant(Tensor::zeros(s)));
            }
            accumulate(0, parts.size() == 1 ? g : concat(parts, axis));
            break;
        }
        case OpKind::Concat: {
            std::size_t offset = 0;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                const std::size_t extent = in(k).shape()[axis];
                if (needs(k)) accumulate(k, slice(g, axis, offset, offset + extent));
                offset += extent;
            }
            break;
        }
    }
}

Var add(const Var& a, const Var& b) { return binary(OpKind::Add, a, b, kernels::active().add, "add"); }
Var sub(const Var& a, const Var& b) { return binary(OpKind::Sub, a, b, kernels::active().sub, "sub"); }
Var mul(const Var& a, const Var& b) { return binary(OpKind::Mul, a, b, kernels::active().mul, "mul"); }
Var div(const Var& a, const Var& b) { return binary(OpKind::Div, a, b, kernels::active().div, "div"); }

Var scale(const Var& a, double factor) {
    Tape& t = tape_of(a, "scale");
    Node n;
    n.kind = OpKind::Scale;
    n.inputs = {a.id()};
    n.scalar = factor;
    n.value = Tensor(a.shape());
    kernels::active().scale(a.value().ptr(), factor, n.value.ptr(), n.value.numel());
    return t.push(std::move(n));
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
    Tape& t = common_tape(a, b, "matmul");
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() != 2 || bs.size() != 2) {
        throw DimensionError(kModule, "matmul needs rank-2 operands, got " + shape_string(as) + " and " +
                                          shape_string(bs));
    }
    const std::size_t m = trans_a ? as[1] : as[0];
    const std::size_t k = trans_a ? as[0] : as[1];
    const std::size_t kb = trans_b ? bs[1] : bs[0];
    const std::size_t n = trans_b ? bs[0] : bs[1];
    if (k != kb) {
        throw DimensionError(kModule, "matmul inner dimensions differ: " + shape_string(as) + " x " +
                                          shape_string(bs));
    }
    Node node;
    node.kind = OpKind::MatMul;
    node.inputs = {a.id(), b.id()};
    node.trans_a = trans_a;
    node.trans_b = trans_b;
    node.value = Tensor({m, n});
    kernels::matmul(trans_a, trans_b, m, n, k, a.value().ptr(), b.value().ptr(), node.value.ptr());
    return t.push(std::move(node));
}

Var sum(const Var& a) {
    Tape& t = tape_of(a, "sum");
    Node n;
    n.kind = OpKind::Sum;
    n.inputs = {a.id()};
    n.value = Tensor::scalar(kernels::active().sum(a.value().ptr(), a.value().numel()));
    return t.push(std::move(n));
}

Var sum_axis(const Var& a, std::size_t axis) {
    Tape& t = tape_of(a, "sum_axis");
    const Shape& s = a.shape();
    if (s.size() != 2 || axis > 1) {
        throw DimensionError(kModule, "sum_axis needs a rank-2 operand and axis 0 or 1, got " + shape_string(s));
    }
    const std::size_t rows = s[0];
    const std::size_t cols = s[1];
    const double* src = a.value().ptr();
    Node n;
    n.kind = OpKind::SumAxis;
    n.inputs = {a.id()};
    n.axis = axis;
    if (axis == 0) {
        n.value = Tensor({cols});
        double* dst = n.value.ptr();
        for (std::size_t r = 0; r < rows; ++r) kernels::active().add(dst, src + r * cols, dst, cols);
    } else {
        n.value = Tensor({rows});
        for (std::size_t r = 0; r < rows; ++r) n.value[r] = kernels::active().sum(src + r * cols, cols);
    }
    return t.push(std::move(n));
}

Var mean(const Var& a) {
    const std::size_t count = a.value().numel();
    if (count == 0) throw DimensionError(kModule, "mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(count));
}

Var expand(const Var& scalar_var, Shape shape) {
    Tape& t = tape_of(scalar_var, "expand");
    if (scalar_var.value().numel() != 1) {
        throw DimensionError(kModule, "expand needs a one-element operand, got " + shape_string(scalar_var.shape()));
    }
    Node n;
    n.kind = OpKind::Expand;
    n.inputs = {scalar_var.id()};
    n.value = Tensor::full(std::move(shape), scalar_var.value()[0]);
    return t.push(std::move(n));
}

Var broadcast_axis(const Var& a, std::size_t axis, std::size_t count) {
    Tape& t = tape_of(a, "broadcast_axis");
    if (a.shape().size() != 1 || axis > 1) {
        throw DimensionError(kModule, "broadcast_axis needs a rank-1 operand and axis 0 or 1");
    }
    const std::size_t len = a.shape()[0];
    const double* src = a.value().ptr();
    Node n;
    n.kind = OpKind::BroadcastAxis;
    n.inputs = {a.id()};
    n.axis = axis;
    if (axis == 0) {
        n.value = Tensor({count, len});
        for (std::size_t r = 0; r < count; ++r) std::copy(src, src + len, n.value.ptr() + r * len);
    } else {
        n.value = Tensor({len, count});
        for (std::size_t r = 0; r < len; ++r) std::fill_n(n.value.ptr() + r * count, count, src[r]);
    }
    return t.push(std::move(n));
}

Var square(const Var& a) {
    Tape& t = tape_of(a, "square");
    Node n;
    n.kind = OpKind::Square;
    n.inputs = {a.id()};
    n.value = Tensor(a.shape());
    kernels::active().square(a.value().ptr(), n.value.ptr(), n.value.numel());
    return t.push(std::move(n));
}

Var sqrt(const Var& a) {
    for (double v : a.value().data()) {
        if (v < 0.0) throw DomainError(kModule, "sqrt of negative value " + std::to_string(v));
    }
    return unary(OpKind::Sqrt, a, [](double v) { return std::sqrt(v); });
}

Var exp(const Var& a) {
    return unary(OpKind::Exp, a, [](double v) { return std::exp(v); });
}

Var log(const Var& a) {
    for (double v : a.value().data()) {
        if (v < 0.0) throw DomainError(kModule, "log of negative value " + std::to_string(v));
    }
    return unary(OpKind::Log, a, [](double v) { return std::log(v); });
}

Var elu(const Var& a) {
    return unary(OpKind::Elu, a, [](double v) { return v > 0.0 ? v : std::expm1(v); });
}

Var elu_deriv(const Var& a, int order) {
    if (order < 1) throw DomainError(kModule, "elu_deriv order must be >= 1");
    Tape& t = tape_of(a, "elu_deriv");
    const Tensor& av = a.value();
    Node n;
    n.kind = OpKind::EluDeriv;
    n.inputs = {a.id()};
    n.order = order;
    n.value = Tensor(av.shape());
    // d/dx elu = 1 (x > 0) or e^x; every higher derivative is 0 or e^x.
    const double positive = order == 1 ? 1.0 : 0.0;
    for (std::size_t i = 0; i < av.numel(); ++i) n.value[i] = av[i] > 0.0 ? positive : std::exp(av[i]);
    return t.push(std::move(n));
}

Var reshape(const Var& a, Shape shape) {
    Tape& t = tape_of(a, "reshape");
    Node n;
    n.kind = OpKind::Reshape;
    n.inputs = {a.id()};
    n.value = a.value().reshaped(std::move(shape));
    return t.push(std::move(n));
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
    Tape& t = tape_of(a, "slice");
    const Shape& s = a.shape();
    if (axis >= s.size() || begin > end || end > s[axis]) {
        throw DimensionError(kModule, "slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                          ") on axis " + std::to_string(axis) + " of " + shape_string(s));
    }
    const AxisView v = axis_view(s, axis);
    Shape out_shape = s;
    out_shape[axis] = end - begin;
    Node n;
    n.kind = OpKind::Slice;
    n.inputs = {a.id()};
    n.axis = axis;
    n.begin = begin;
    n.end = end;
    n.value = Tensor(out_shape);
    const std::size_t chunk = (end - begin) * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o) {
        const double* src = a.value().ptr() + (o * v.extent + begin) * v.inner;
        std::copy(src, src + chunk, n.value.ptr() + o * chunk);
    }
    return t.push(std::move(n));
}

Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError(kModule, "concat of zero tensors");
    Tape& t = tape_of(parts[0], "concat");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw DimensionError(kModule, "concat axis out of range");
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const Var& p : parts) {
        if (p.tape() != &t) throw GraphError(kModule, "concat: operands live on different tapes");
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
        if (!ok) {
            throw DimensionError(kModule, "concat: shape " + shape_string(s) + " does not match " +
                                              shape_string(first));
        }
        out_shape[axis] += s[axis];
    }
    const AxisView ov = axis_view(out_shape, axis);
    Node n;
    n.kind = OpKind::Concat;
    n.axis = axis;
    n.value = Tensor(out_shape);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        n.inputs.push_back(p.id());
        const std::size_t extent = p.shape()[axis];
        const std::size_t chunk = extent * ov.inner;
        for (std::size_t o = 0; o < ov.outer; ++o) {
            const double* src = p.value().ptr() + o * chunk;
            std::copy(src, src + chunk, n.value.ptr() + (o * ov.extent + offset) * ov.inner);
        }
        offset += extent;
    }
    return t.push(std::move(n));
}

}  // namespace mdsm::ad
