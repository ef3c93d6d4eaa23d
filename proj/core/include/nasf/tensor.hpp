#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nasf {

/// Dense n-dimensional array of doubles, row-major. Shape entries are
/// always >= 1 and data.size() == product(shape).
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<int> shape);

    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor filled(std::vector<int> shape, double value);

    const std::vector<int>& shape() const { return shape_; }
    int dim(std::size_t axis) const { return shape_[axis]; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Indexed access for the ranks the engine uses.
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    const double& at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double& at(int n, int c, int y, int x);
    const double& at(int n, int c, int y, int x) const;

    void fill(double value);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    /// "[2, 3, 4]" - used in error messages.
    std::string shape_str() const;

    static std::size_t shape_product(const std::vector<int>& shape);

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

/// Throws ShapeError mentioning `what` if the two shapes differ.
void check_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

} // namespace nasf
