#include "nasf/tensor.hpp"

#include <cmath>
#include <sstream>

#include "nasf/errors.hpp"

namespace nasf {

std::size_t Tensor::shape_product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

namespace {

void check_shape_entries(const std::vector<int>& shape) {
    if (shape.empty()) {
        throw ShapeError("tensor shape must have at least one dimension");
    }
    for (int d : shape) {
        if (d < 1) {
            throw ShapeError("tensor shape entries must be >= 1, got " +
                             std::to_string(d));
        }
    }
}

} // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    check_shape_entries(shape_);
    data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape_entries(shape_);
    if (data_.size() != shape_product(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
    }
}

Tensor Tensor::filled(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

double& Tensor::at(int n, int c, int y, int x) {
    const std::size_t idx =
        ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
    return data_[idx];
}

const double& Tensor::at(int n, int c, int y, int x) const {
    const std::size_t idx =
        ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
    return data_[idx];
}

void Tensor::fill(double value) {
    data_.assign(data_.size(), value);
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ", ";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
    if (!a.same_shape(b)) {
        throw ShapeError(what + ": shape " + a.shape_str() + " vs " + b.shape_str());
    }
}

} // namespace nasf
