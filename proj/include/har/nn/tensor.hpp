#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace har::nn {

using Shape = std::vector<std::size_t>;

// Contiguous N-dimensional array of 64-bit floats, row-major.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), 0.0);
    }

    Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
        if (data_.size() != count(shape_)) {
            throw std::invalid_argument("tensor: value count does not match shape");
        }
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, double v) {
        Tensor t(std::move(shape));
        t.fill(v);
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    Tensor reshaped(Shape new_shape) const {
        if (count(new_shape) != data_.size()) {
            throw std::invalid_argument("tensor: reshape changes element count");
        }
        return Tensor(std::move(new_shape), data_);
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    static std::size_t count(const Shape& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    static std::string shape_string(const Shape& shape) {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

// Trainable tensor with gradient and momentum buffers of the same shape.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor momentum;
    bool weight_decay = true; // participates in the L2 penalty

    Parameter() = default;
    Parameter(std::string n, Tensor v, bool decay = true)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()), momentum(value.shape()), weight_decay(decay) {}

    void zero_grad() { grad.fill(0.0); }
};

} // namespace har::nn
