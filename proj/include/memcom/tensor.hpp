#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace memcom {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Every extent is positive and the flat buffer always holds exactly
/// shape_numel(shape) values. Tensors are plain values: copying copies data.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    std::span<double> row(std::size_t i);
    std::span<const double> row(std::size_t i) const;

    /// Same data viewed under a new shape with equal element count.
    Tensor reshaped(Shape shape) const;
    void fill(double value);
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

  private:
    Shape shape_;
    std::vector<double> data_;
};

/// Value plus accumulated gradient of identical shape.
struct GradPair {
    Tensor value;
    Tensor grad;

    GradPair() = default;
    explicit GradPair(Tensor v) : value(std::move(v)), grad(value.shape(), 0.0) {}

    void zero_grad() { grad.fill(0.0); }
};

}  // namespace memcom
