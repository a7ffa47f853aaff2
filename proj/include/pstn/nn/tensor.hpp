#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pstn/common/scalar.hpp"

namespace pstn::nn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major array with an optional gradient buffer of the same shape.
// The gradient is allocated on first access.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0));
  Tensor(Shape shape, std::vector<Scalar> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }
  std::span<Scalar> values() { return values_; }
  std::span<const Scalar> values() const { return values_; }
  Scalar& operator[](std::size_t i) { return values_[i]; }
  Scalar operator[](std::size_t i) const { return values_[i]; }

  bool has_grad() const { return !grad_.empty(); }
  std::span<Scalar> grad();
  std::span<const Scalar> grad() const { return grad_; }
  void zero_grad();

  // Same values viewed with a different shape of equal element count.
  void reshape(Shape shape);
  Tensor reshaped(Shape shape) const;

  // Contiguous block [index * stride, (index+1) * stride) along axis 0.
  std::span<Scalar> slice(std::size_t index);
  std::span<const Scalar> slice(std::size_t index) const;
  // Per-item shape (shape without the leading axis).
  Shape item_shape() const { return Shape(shape_.begin() + 1, shape_.end()); }

  void fill(Scalar value);

  // Throws NumericError naming `what` and the first offending index.
  void check_finite(std::string_view what) const;

 private:
  Shape shape_;
  std::vector<Scalar> values_;
  std::vector<Scalar> grad_;
};

}  // namespace pstn::nn
