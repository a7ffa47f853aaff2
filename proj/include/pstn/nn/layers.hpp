#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pstn/common/rng.hpp"
#include "pstn/nn/tensor.hpp"

namespace pstn::nn {

enum class Mode { train, eval };

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

// One differentiable stage. Tensors carry a leading batch axis; shapes passed
// to output_shape() exclude it.
//
// forward() caches whatever backward() needs; infer() is the pure eval-mode
// path and never touches the cache, so a network can serve concurrent
// read-only inference.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;

  virtual Tensor forward(const Tensor& input, Mode mode) = 0;
  // Accumulates parameter gradients and returns the input gradient.
  virtual Tensor backward(const Tensor& grad_output) = 0;
  virtual Tensor infer(const Tensor& input) const = 0;

  virtual std::vector<ParamRef> parameters() { return {}; }

 protected:
  void require_cache(bool cached) const;
};

// Valid (unpadded) 2D convolution over [C, H, W] items. Conv1d reuses it with
// H = 1.
class Conv2d : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
         std::size_t kernel_w, std::size_t stride = 1);

  std::string_view kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  Tensor infer(const Tensor& input) const override;
  std::vector<ParamRef> parameters() override;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  std::size_t fan_in() const { return in_channels_ * kernel_h_ * kernel_w_; }

 protected:
  // Input viewed as [N, C, H, W] regardless of the caller's rank.
  Shape as_image(const Shape& batch_shape) const;
  Tensor run(const Tensor& input, std::vector<Scalar>* columns) const;

  std::size_t in_channels_, out_channels_, kernel_h_, kernel_w_, stride_;
  Tensor weight_;  // [out, in, kh, kw]
  Tensor bias_;    // [out]
  std::vector<Scalar> columns_;
  Shape cached_input_shape_;
  bool cached_ = false;
};

class Conv1d : public Conv2d {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride = 1)
      : Conv2d(in_channels, out_channels, 1, kernel, stride) {}
  std::string_view kind() const override { return "conv1d"; }
};

class Dense : public Layer {
 public:
  Dense(std::size_t in_features, std::size_t out_features);

  std::string_view kind() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  Tensor infer(const Tensor& input) const override;
  std::vector<ParamRef> parameters() override;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  std::size_t fan_in() const { return in_features_; }

 private:
  std::size_t in_features_, out_features_;
  Tensor weight_;  // [out, in]
  Tensor bias_;    // [out]
  Tensor input_;
  bool cached_ = false;
};

// Non-overlapping max pooling (stride = window); trailing rows/columns that do
// not fill a window are dropped.
class MaxPool2d : public Layer {
 public:
  MaxPool2d(std::size_t window_h, std::size_t window_w);
  explicit MaxPool2d(std::size_t window) : MaxPool2d(window, window) {}

  std::string_view kind() const override { return "maxpool2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  Tensor infer(const Tensor& input) const override;

 protected:
  Tensor run(const Tensor& input, std::vector<std::size_t>* argmax) const;

  std::size_t window_h_, window_w_;
  std::vector<std::size_t> argmax_;
  Shape cached_input_shape_;
  bool cached_ = false;
};

class MaxPool1d : public MaxPool2d {
 public:
  explicit MaxPool1d(std::size_t window) : MaxPool2d(1, window) {}
  std::string_view kind() const override { return "maxpool1d"; }
};

class ReLU : public Layer {
 public:
  std::string_view kind() const override { return "relu"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  Tensor infer(const Tensor& input) const override;

 private:
  Tensor input_;
  bool cached_ = false;
};

// Inverted dropout: active only in train mode, scaling kept units by 1/(1-p).
class Dropout : public Layer {
 public:
  Dropout(double drop_probability, std::uint64_t seed);

  std::string_view kind() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  Tensor infer(const Tensor& input) const override { return input; }

  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  double drop_probability() const { return p_; }

 private:
  double p_;
  Rng rng_;
  std::vector<Scalar> mask_;
  bool cached_ = false;
};

class Flatten : public Layer {
 public:
  std::string_view kind() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, Mode mode) override;
  Tensor backward(const Tensor& grad_output) override;
  Tensor infer(const Tensor& input) const override;

 private:
  Shape cached_input_shape_;
  bool cached_ = false;
};

}  // namespace pstn::nn
