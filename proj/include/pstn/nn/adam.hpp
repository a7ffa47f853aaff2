#pragma once

#include <cstdint>
#include <vector>

#include "pstn/nn/layers.hpp"

namespace pstn::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  // true: w <- w - lr * decay * w, separate from the moments (AdamW).
  // false: decay * w is added to the gradient (classic L2 / torch.optim.Adam).
  bool decoupled_weight_decay = true;
};

// Adam with bias correction. Moment buffers are allocated per parameter in
// the order given at construction.
class Adam {
 public:
  Adam(std::vector<ParamRef> params, AdamOptions options = {});

  // Applies one update from the current gradient buffers. A non-finite
  // gradient aborts the step before any parameter changes.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const std::vector<Scalar>& first_moment(std::size_t i) const { return m_.at(i); }
  const std::vector<Scalar>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  std::vector<ParamRef> params_;
  AdamOptions options_;
  std::vector<std::vector<Scalar>> m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace pstn::nn
