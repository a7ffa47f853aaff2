#include "pstn/data/augment.hpp"

#include <algorithm>

#include "pstn/common/error.hpp"

namespace pstn::data {

std::vector<double> draw_prior_theta(const warp::Transform& transform, double sigma, Rng& rng) {
  std::vector<double> theta(transform.param_dim());
  for (double& t : theta) t = sigma * rng.normal();
  return theta;
}

Batch traditional_da(const Batch& batch, const warp::Transform& transform, const DaSpec& spec,
                     Rng& rng) {
  if (spec.sigma < 0.0) throw ConfigError("sigma_da must be non-negative");
  if (spec.samples_per_example == 0) throw ConfigError("samples_per_example must be >= 1");
  const std::size_t n = batch.labels.size();
  const std::size_t m = spec.samples_per_example;
  nn::Shape shape = batch.inputs.shape();
  const nn::Shape item = batch.inputs.item_shape();
  shape[0] = n * m;
  Batch out{nn::Tensor(shape), {}};
  out.labels.reserve(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const Scalar> src = batch.inputs.slice(i);
    const nn::Tensor source(item, std::vector<Scalar>(src.begin(), src.end()));
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t dst = i * m + r;
      if (spec.sigma == 0.0) {
        std::copy(src.begin(), src.end(), out.inputs.slice(dst).begin());
      } else {
        const std::vector<double> theta = draw_prior_theta(transform, spec.sigma, rng);
        const nn::Tensor warped = warp::warp(transform, source, theta);
        std::copy(warped.values().begin(), warped.values().end(), out.inputs.slice(dst).begin());
      }
      out.labels.push_back(batch.labels[i]);
    }
  }
  return out;
}

AugmentedBatchStream::AugmentedBatchStream(const Dataset& dataset, const warp::Transform* transform,
                                           DaSpec spec, std::size_t batch_size, std::uint64_t seed)
    : dataset_(dataset), transform_(transform), spec_(spec), batch_size_(batch_size), rng_(seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  next_epoch();
}

void AugmentedBatchStream::next_epoch() {
  batches_ = make_batches(dataset_.size(), batch_size_, rng_);
  cursor_ = 0;
}

bool AugmentedBatchStream::next(Batch& out) {
  if (cursor_ >= batches_.size()) return false;
  Batch raw = dataset_.gather(batches_[cursor_++]);
  out = transform_ ? traditional_da(raw, *transform_, spec_, rng_) : std::move(raw);
  return true;
}

}  // namespace pstn::data
