#pragma once

#include <cstdint>
#include <vector>

#include "pstn/common/rng.hpp"
#include "pstn/data/dataset.hpp"
#include "pstn/warp/transform.hpp"

namespace pstn::data {

// Fixed-prior augmentation: theta ~ N(0, sigma^2 I), drawn independently for
// every copy, applied before the data reaches the model.
struct DaSpec {
  double sigma = 0.05;
  std::size_t samples_per_example = 1;  // M warped copies per input
};

// Draws one theta of the transform's dimension.
std::vector<double> draw_prior_theta(const warp::Transform& transform, double sigma, Rng& rng);

// Warps every element of `batch` M times (copies of one example are
// adjacent). With sigma = 0 the inputs pass through unchanged.
Batch traditional_da(const Batch& batch, const warp::Transform& transform, const DaSpec& spec,
                     Rng& rng);

// Single-consumer stream of shuffled, augmented mini-batches over one epoch
// at a time. Reshuffles and redraws on every call to next_epoch().
class AugmentedBatchStream {
 public:
  AugmentedBatchStream(const Dataset& dataset, const warp::Transform* transform, DaSpec spec,
                       std::size_t batch_size, std::uint64_t seed);

  void next_epoch();
  // False once the current epoch is exhausted.
  bool next(Batch& out);

 private:
  const Dataset& dataset_;
  const warp::Transform* transform_;  // null: no augmentation
  DaSpec spec_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> batches_;
  std::size_t cursor_ = 0;
};

}  // namespace pstn::data
