#pragma once

#include <span>
#include <vector>

#include "pstn/common/rng.hpp"
#include "pstn/nn/tensor.hpp"
#include "pstn/warp/transform.hpp"

namespace pstn::model {

// Diagonal Gaussian q(theta | I_obs) for one input.
struct GaussianPosterior {
  std::vector<double> mu;
  std::vector<double> sigma;  // > 0 elementwise
  std::size_t dim() const { return mu.size(); }
};

// Isotropic prior N(0, sigma_p^2 I).
struct Prior {
  double sigma_p = 0.05;
};

struct ThetaSample {
  std::vector<double> theta;  // mu + sigma * eps
  std::vector<double> eps;    // d theta / d sigma
};

// Reparametrised draw; d theta / d mu is the identity.
ThetaSample sample_theta(const GaussianPosterior& posterior, Rng& rng);

struct KlResult {
  double value = 0.0;
  std::vector<double> d_mu;
  std::vector<double> d_sigma;
};

// sum_j ln(sigma_p / sigma_j) + (sigma_j^2 + mu_j^2) / (2 sigma_p^2) - 1/2.
// Throws ConfigError when a sigma is not strictly positive.
KlResult kl_to_prior(const GaussianPosterior& posterior, const Prior& prior);

// warp(I_obs, theta) plus sigma_noise * N(0, 1) per pixel.
nn::Tensor augment(const warp::Transform& transform, const nn::Tensor& source,
                   std::span<const double> theta, double sigma_noise, Rng& rng);

}  // namespace pstn::model
