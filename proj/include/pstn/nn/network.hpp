#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pstn/common/rng.hpp"
#include "pstn/nn/layers.hpp"

namespace pstn::nn {

// Layer sequence with shape inference. Builder methods append a layer sized
// from the current output shape; conv and dense weights get Kaiming-uniform
// fan-in initialisation (bound 1 / sqrt(fan_in), the torch.nn default) and
// zero bias.
class Network {
 public:
  Network(Shape input_shape, std::uint64_t init_seed);

  Network& conv2d(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1);
  Network& conv1d(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1);
  Network& dense(std::size_t out_features);
  Network& maxpool2d(std::size_t window);
  Network& maxpool1d(std::size_t window);
  Network& relu();
  Network& dropout(double drop_probability);
  Network& flatten();

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  Layer& back() { return *layers_.back(); }

  Tensor forward(const Tensor& input, Mode mode);
  Tensor backward(const Tensor& grad_output);
  Tensor infer(const Tensor& input) const;

  // Names are "<layer index>.<param>", e.g. "3.weight".
  std::vector<ParamRef> parameters();
  std::size_t parameter_count();
  void zero_grad();

  // Resets the mask stream of every dropout layer.
  void reseed_dropout(std::uint64_t seed);

 private:
  void check_input(const Tensor& input) const;
  Network& push(std::unique_ptr<Layer> layer);

  Shape input_shape_;
  Shape output_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Rng init_rng_;
  bool forward_done_ = false;
};

}  // namespace pstn::nn
