#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convbench/errors.hpp"

namespace convbench {

using Shape = std::vector<int>;

std::int64_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major N-dimensional array of 64-bit reals. Values are required
/// to be finite; construction from data and every tape operation enforce it.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape); // zero-filled
    Tensor(Shape shape, std::vector<double> data);

    static Tensor full(Shape shape, double value);
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    /// Element access for rank-3 [C,H,W] tensors, the layout every network
    /// operation uses.
    double& at3(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at3(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool finite() const;
    void require_finite(const char* what) const;

    void fill(double value);
    void add_scaled(const Tensor& other, double scale); // *this += scale * other

private:
    Shape shape_;
    std::vector<double> data_;
};

} // namespace convbench
