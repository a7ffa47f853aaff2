#include "pstn/nn/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "pstn/common/error.hpp"

namespace pstn::nn {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? ", " : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, Scalar fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<Scalar> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw ConfigError("tensor shape " + to_string(shape_) + " does not match " +
                      std::to_string(values_.size()) + " values");
  }
}

std::span<Scalar> Tensor::grad() {
  if (grad_.size() != values_.size()) grad_.assign(values_.size(), Scalar(0));
  return grad_;
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), Scalar(0)); }

void Tensor::reshape(Shape shape) {
  if (element_count(shape) != values_.size()) {
    throw ConfigError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  shape_ = std::move(shape);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

std::span<Scalar> Tensor::slice(std::size_t index) {
  const std::size_t stride = shape_.empty() ? 0 : values_.size() / shape_[0];
  return std::span<Scalar>(values_).subspan(index * stride, stride);
}

std::span<const Scalar> Tensor::slice(std::size_t index) const {
  const std::size_t stride = shape_.empty() ? 0 : values_.size() / shape_[0];
  return std::span<const Scalar>(values_).subspan(index * stride, stride);
}

void Tensor::fill(Scalar value) { std::fill(values_.begin(), values_.end(), value); }

void Tensor::check_finite(std::string_view what) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      std::ostringstream msg;
      msg << what << ": non-finite value " << values_[i] << " at index " << i;
      throw NumericError(msg.str());
    }
  }
}

}  // namespace pstn::nn
