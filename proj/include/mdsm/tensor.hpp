#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mdsm {

using Shape = std::vector<std::size_t>;

[[nodiscard]] std::size_t shape_numel(const Shape& shape) noexcept;
[[nodiscard]] std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Shape [] is a scalar with one element.
class Tensor {
public:
    Tensor() : shape_{0} {}
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value) { return Tensor({}, {value}); }
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t axis) const;
    [[nodiscard]] std::size_t numel() const noexcept { return data_.size(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] double* ptr() noexcept { return data_.data(); }
    [[nodiscard]] const double* ptr() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // 2-D access.
    double& at(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_[1] + c]; }
    [[nodiscard]] std::span<double> row(std::size_t r);
    [[nodiscard]] std::span<const double> row(std::size_t r) const;

    // Value of a one-element tensor.
    [[nodiscard]] double item() const;

    [[nodiscard]] Tensor reshaped(Shape shape) const;
    [[nodiscard]] bool all_finite() const;

    // Exact equality of shape and bit patterns.
    [[nodiscard]] bool bit_equal(const Tensor& other) const noexcept;

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace mdsm
