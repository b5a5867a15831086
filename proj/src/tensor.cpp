#include "ttfuse/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace ttfuse {

std::size_t shape_size(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(std::span<const std::size_t> shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (std::size_t d : shape_)
        if (d == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape_));
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (std::size_t d : shape_)
        if (d == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape_));
    if (shape_size(shape_) != data_.size())
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                    shape_str(shape_));
}

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

std::size_t Tensor::flat_index(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) throw std::out_of_range("index rank mismatch");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= shape_[k]) throw std::out_of_range("tensor index out of range");
        flat = flat * shape_[k] + index[k];
    }
    return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
    return data_[flat_index(std::span<const std::size_t>(index.begin(), index.size()))];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    return data_[flat_index(std::span<const std::size_t>(index.begin(), index.size()))];
}

Tensor Tensor::reshaped(Shape shape) const& {
    Tensor copy = *this;
    return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
    if (shape_size(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = std::move(data_);
    return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void require_shape(const Tensor& t, std::span<const std::size_t> expected, const char* what) {
    if (!std::equal(t.shape().begin(), t.shape().end(), expected.begin(), expected.end()))
        throw std::invalid_argument(std::string(what) + ": expected shape " + shape_str(expected) + ", got " +
                                    shape_str(t.shape()));
}

}  // namespace ttfuse
