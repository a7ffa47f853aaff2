#pragma once

#include <span>

#include "pstn/nn/tensor.hpp"

namespace pstn::nn {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d logits
};

// Mean negative log-likelihood of `labels` under softmax(logits), logits
// [batch, classes]. Gradient is (softmax - onehot) / batch.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Row-wise softmax of [batch, classes] logits.
Tensor softmax(const Tensor& logits);

}  // namespace pstn::nn
