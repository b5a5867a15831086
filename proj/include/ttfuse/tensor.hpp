#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ttfuse {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(std::span<const std::size_t> shape);
std::string shape_str(std::span<const std::size_t> shape);

// Row-major dense array of doubles. Strides are implied by the shape; the last
// axis is contiguous.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor vector(std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    // Multi-index access with bounds checks.
    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;
    std::size_t flat_index(std::span<const std::size_t> index) const;

    // Same data, new shape. Throws std::invalid_argument if sizes differ.
    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    void fill(double v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

void require_shape(const Tensor& t, std::span<const std::size_t> expected, const char* what);

}  // namespace ttfuse
