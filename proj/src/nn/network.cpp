#include "pstn/nn/network.hpp"

#include <cmath>

#include "pstn/common/error.hpp"

namespace pstn::nn {
namespace {

// Kaiming-uniform with negative slope sqrt(5), the torch.nn default:
// gain sqrt(2 / (1 + 5)) times sqrt(3 / fan_in) gives 1 / sqrt(fan_in).
void kaiming_uniform(Tensor& weight, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Scalar& w : weight.values()) w = static_cast<Scalar>(rng.uniform(-bound, bound));
}

}  // namespace

Network::Network(Shape input_shape, std::uint64_t init_seed)
    : input_shape_(std::move(input_shape)), output_shape_(input_shape_), init_rng_(init_seed) {
  if (input_shape_.empty() || element_count(input_shape_) == 0) {
    throw ConfigError("network input shape must be non-empty, got " + to_string(input_shape_));
  }
}

Network& Network::push(std::unique_ptr<Layer> layer) {
  output_shape_ = layer->output_shape(output_shape_);
  layers_.push_back(std::move(layer));
  return *this;
}

Network& Network::conv2d(std::size_t out_channels, std::size_t kernel, std::size_t stride) {
  if (output_shape_.size() != 3) throw ConfigError("conv2d needs a [C, H, W] input");
  auto conv = std::make_unique<Conv2d>(output_shape_[0], out_channels, kernel, kernel, stride);
  kaiming_uniform(conv->weight(), conv->fan_in(), init_rng_);
  return push(std::move(conv));
}

Network& Network::conv1d(std::size_t out_channels, std::size_t kernel, std::size_t stride) {
  if (output_shape_.size() != 2) throw ConfigError("conv1d needs a [C, L] input");
  auto conv = std::make_unique<Conv1d>(output_shape_[0], out_channels, kernel, stride);
  kaiming_uniform(conv->weight(), conv->fan_in(), init_rng_);
  return push(std::move(conv));
}

Network& Network::dense(std::size_t out_features) {
  if (output_shape_.size() != 1) throw ConfigError("dense needs a flat input; add flatten()");
  auto layer = std::make_unique<Dense>(output_shape_[0], out_features);
  kaiming_uniform(layer->weight(), layer->fan_in(), init_rng_);
  return push(std::move(layer));
}

Network& Network::maxpool2d(std::size_t window) {
  return push(std::make_unique<MaxPool2d>(window));
}

Network& Network::maxpool1d(std::size_t window) {
  return push(std::make_unique<MaxPool1d>(window));
}

Network& Network::relu() { return push(std::make_unique<ReLU>()); }

Network& Network::dropout(double drop_probability) {
  return push(std::make_unique<Dropout>(drop_probability, init_rng_.next()));
}

Network& Network::flatten() { return push(std::make_unique<Flatten>()); }

void Network::check_input(const Tensor& input) const {
  if (input.rank() != input_shape_.size() + 1 || input.item_shape() != input_shape_) {
    throw ConfigError("network expects [N, " + to_string(input_shape_).substr(1) +
                      " input, got " + to_string(input.shape()));
  }
}

Tensor Network::forward(const Tensor& input, Mode mode) {
  check_input(input);
  Tensor x = input;
  for (auto& layer : layers_) x = layer->forward(x, mode);
  forward_done_ = true;
  return x;
}

Tensor Network::backward(const Tensor& grad_output) {
  if (!forward_done_) throw StateError("network: backward called before forward");
  Tensor g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

Tensor Network::infer(const Tensor& input) const {
  check_input(input);
  Tensor x = input;
  for (const auto& layer : layers_) x = layer->infer(x);
  return x;
}

std::vector<ParamRef> Network::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (ParamRef p : layers_[i]->parameters()) {
      p.name = std::to_string(i) + "." + p.name;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::size_t Network::parameter_count() {
  std::size_t n = 0;
  for (const ParamRef& p : parameters()) n += p.tensor->size();
  return n;
}

void Network::zero_grad() {
  for (ParamRef& p : parameters()) p.tensor->zero_grad();
}

void Network::reseed_dropout(std::uint64_t seed) {
  Rng seeds(seed);
  for (auto& layer : layers_) {
    if (auto* d = dynamic_cast<Dropout*>(layer.get())) d->reseed(seeds.next());
  }
}

}  // namespace pstn::nn
