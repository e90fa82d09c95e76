#include "mdsm/tensor.hpp"

#include <cstring>
#include <functional>
#include <numeric>

#include "mdsm/error.hpp"
#include "mdsm/kernels.hpp"

namespace mdsm {

std::size_t shape_numel(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
        throw DimensionError("tensor", "shape " + shape_string(shape_) + " needs " +
                                           std::to_string(shape_numel(shape_)) + " elements, got " +
                                           std::to_string(data_.size()));
    }
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("tensor", "ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("tensor", "axis " + std::to_string(axis) + " out of range for shape " +
                                           shape_string(shape_));
    }
    return shape_[axis];
}

std::span<double> Tensor::row(std::size_t r) {
    const std::size_t width = numel() / shape_[0];
    return {data_.data() + r * width, width};
}

std::span<const double> Tensor::row(std::size_t r) const {
    const std::size_t width = numel() / shape_[0];
    return {data_.data() + r * width, width};
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw DimensionError("tensor", "item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
        throw DimensionError("tensor", "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const { return kernels::active().all_finite(data_.data(), data_.size()); }

bool Tensor::bit_equal(const Tensor& other) const noexcept {
    return shape_ == other.shape_ &&
           (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

}  // namespace mdsm
