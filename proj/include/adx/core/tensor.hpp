#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "adx/core/error.hpp"

namespace adx {

/// Dense row-major array of doubles with a runtime shape.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != element_count(shape_)) {
      throw DimensionError("tensor value count " + std::to_string(values_.size()) +
                           " does not match shape element count " +
                           std::to_string(element_count(shape_)));
    }
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(double v) {
    for (auto& x : values_) x = v;
  }

  bool operator==(const Tensor&) const = default;

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace adx
