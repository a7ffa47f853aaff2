#include "pstn/model/posterior.hpp"

#include <cmath>

#include "pstn/common/error.hpp"

namespace pstn::model {

ThetaSample sample_theta(const GaussianPosterior& posterior, Rng& rng) {
  ThetaSample s;
  s.theta.resize(posterior.dim());
  s.eps.resize(posterior.dim());
  for (std::size_t j = 0; j < posterior.dim(); ++j) {
    s.eps[j] = rng.normal();
    s.theta[j] = posterior.mu[j] + posterior.sigma[j] * s.eps[j];
  }
  return s;
}

KlResult kl_to_prior(const GaussianPosterior& posterior, const Prior& prior) {
  if (!(prior.sigma_p > 0.0)) throw ConfigError("prior sigma_p must be positive");
  const double vp = prior.sigma_p * prior.sigma_p;
  KlResult r;
  r.d_mu.resize(posterior.dim());
  r.d_sigma.resize(posterior.dim());
  for (std::size_t j = 0; j < posterior.dim(); ++j) {
    const double s = posterior.sigma[j];
    const double m = posterior.mu[j];
    if (!(s > 0.0)) throw ConfigError("posterior sigma must be positive");
    r.value += std::log(prior.sigma_p / s) + (s * s + m * m) / (2.0 * vp) - 0.5;
    r.d_mu[j] = m / vp;
    r.d_sigma[j] = s / vp - 1.0 / s;
  }
  return r;
}

nn::Tensor augment(const warp::Transform& transform, const nn::Tensor& source,
                   std::span<const double> theta, double sigma_noise, Rng& rng) {
  nn::Tensor out = warp::warp(transform, source, theta);
  if (sigma_noise > 0.0) {
    for (Scalar& v : out.values()) v += static_cast<Scalar>(sigma_noise * rng.normal());
  }
  return out;
}

}  // namespace pstn::model
