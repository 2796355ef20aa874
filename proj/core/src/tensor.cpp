#include "convbench/tensor.hpp"

#include <cmath>
#include <sstream>

namespace convbench {

std::int64_t shape_size(const Shape& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    for (int e : shape_) {
        if (e <= 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
        }
    }
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (int e : shape_) {
        if (e <= 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
        }
    }
    if (static_cast<std::int64_t>(data_.size()) != shape_size(shape_)) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }
    require_finite("tensor construction");
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    t.require_finite("tensor fill");
    return t;
}

bool Tensor::finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

void Tensor::require_finite(const char* what) const {
    if (!finite()) {
        throw NumericError(std::string("non-finite value in ") + what);
    }
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

void Tensor::add_scaled(const Tensor& other, double scale) {
    if (!same_shape(other)) {
        throw DimensionError("add_scaled shape mismatch: " + shape_str(shape_) + " vs " +
                             shape_str(other.shape_));
    }
    const double* src = other.data();
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += scale * src[i];
    }
}

} // namespace convbench
