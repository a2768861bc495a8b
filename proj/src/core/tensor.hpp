#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "core/error.hpp"

namespace uqr::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major tensor. An empty shape denotes a scalar.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : shape_{}, values_(1, T{0}) {}

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
    for (std::size_t e : shape_)
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
    if (shape_size(shape_) != values_.size())
      throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " +
                       std::to_string(values_.size()) + " values");
  }

  static Tensor full(Shape shape, T value) {
    std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value));
  }
  static Tensor zeros(Shape shape) { return full(std::move(shape), T{0}); }
  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return values_.size(); }
  bool is_scalar() const noexcept { return values_.size() == 1; }

  std::span<const T> values() const noexcept { return values_; }
  std::span<T> values() noexcept { return values_; }
  const std::vector<T>& data() const noexcept { return values_; }

  T operator[](std::size_t i) const { return values_[i]; }
  T& operator[](std::size_t i) { return values_[i]; }
  T item() const {
    if (values_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
    return values_[0];
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

}  // namespace uqr::ad
