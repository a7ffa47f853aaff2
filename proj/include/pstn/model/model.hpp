#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pstn/common/rng.hpp"
#include "pstn/cpab/tessellation.hpp"
#include "pstn/model/posterior.hpp"
#include "pstn/nn/network.hpp"
#include "pstn/warp/transform.hpp"

namespace pstn::model {

enum class Variant { cnn, stn, pstn };
enum class Family { none, affine, diffeo };

std::string to_string(Variant v);
std::string to_string(Family f);
Variant parse_variant(const std::string& name);
Family parse_family(const std::string& name);

// conv(c, k) -> maxpool(p) -> relu for each c, then flatten, then
// dense(h) -> relu for each h, then a final dense layer.
struct NetSpec {
  std::vector<std::size_t> conv_channels;
  std::size_t kernel = 5;
  std::size_t pool = 2;
  std::vector<std::size_t> hidden;
};

NetSpec default_classifier_net();  // conv 10, 20; dense 50
NetSpec default_localizer_net();   // conv 8, 10; dense 32

struct ModelSpec {
  nn::Shape input_shape;  // [C, H, W] or [C, L]
  std::size_t classes = 10;
  Variant variant = Variant::pstn;
  Family family = Family::affine;  // cnn keeps it only for fixed-prior augmentation
  double sigma_p = 0.05;
  double sigma_noise = 0.0;
  std::size_t s_train = 1;
  std::size_t s_test = 10;
  double kl_weight = 1.0;
  cpab::TessellationSpec tessellation;  // empty cells: 16 (1D) or 2x2 (2D)
  std::size_t integration_steps = 100;
  NetSpec classifier = default_classifier_net();
  NetSpec localizer = default_localizer_net();
  std::uint64_t seed = 0;
};

// Fills defaulted fields (tessellation) and throws ConfigError on an
// inconsistent combination.
ModelSpec resolve(ModelSpec spec);

// The reconstruction term of the bound is constant in every trainable
// quantity (the warp is linear in the image and p(I) is flat), so it is
// carried as an explicit zero.
struct ElboTerms {
  double class_loss = 0.0;  // mean -log p(y | I_s) over examples and samples
  double kl = 0.0;          // mean per-example KL to the prior
  double reconstruction = 0.0;
  double loss = 0.0;        // class_loss + kl_weight * kl, minimised
  double elbo() const { return -class_loss - kl + reconstruction; }
};

struct LossOptions {
  std::optional<std::size_t> samples;  // default s_train
  double sigma_scale = 1.0;            // multiplies sampled sigma only
  // Replace the localizer output by a fixed posterior N(mu, sigma^2) in every
  // dimension (e.g. mu = 0, sigma = sigma_p gives fixed-prior augmentation).
  std::optional<std::pair<double, double>> fixed_posterior;
};

struct PosteriorBatch {
  std::size_t dim = 0;
  std::vector<double> mu;     // [n x dim]
  std::vector<double> sigma;  // [n x dim]
  GaussianPosterior at(std::size_t i) const;
};

// Localizer + warp + classifier. cnn skips the first two; stn warps by mu;
// pstn samples theta from the amortised posterior.
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  Variant variant() const { return spec_.variant; }
  bool has_localizer() const { return localizer_ != nullptr; }
  const warp::Transform* transform() const { return transform_.get(); }
  std::size_t theta_dim() const { return transform_ ? transform_->param_dim() : 0; }

  nn::Network& classifier() { return *classifier_; }
  nn::Network& localizer() { return *localizer_; }

  // Named parameters "classifier.<i>.<p>" then "localizer.<i>.<p>".
  std::vector<nn::ParamRef> parameters();
  std::vector<nn::ParamRef> classifier_parameters();
  std::vector<nn::ParamRef> localizer_parameters();
  std::size_t parameter_count();
  void zero_grad();

  // Posterior per example. The stn variant reports sigma = 0.
  PosteriorBatch localize(const nn::Tensor& inputs) const;

  // Forward + backward on one batch; gradients accumulate into the
  // parameters. Throws NumericError on a non-finite loss.
  ElboTerms loss_and_backward(const nn::Tensor& inputs, std::span<const int> labels, Rng& rng,
                              const LossOptions& options = {});

  // Loss only, without touching gradient buffers or caches.
  ElboTerms loss(const nn::Tensor& inputs, std::span<const int> labels, Rng& rng,
                 const LossOptions& options = {}) const;

  // [n, classes] probabilities averaged over `samples` posterior draws
  // (default s_test; cnn and stn use a single pass).
  nn::Tensor predict(const nn::Tensor& inputs, Rng& rng, std::optional<std::size_t> samples = {},
                     double sigma_scale = 1.0) const;

 private:
  struct Draws {
    std::size_t samples = 1;
    PosteriorBatch posterior;
    std::vector<double> eps;    // [samples x n x dim]
    std::vector<double> theta;  // [samples x n x dim]
  };
  Draws draw(const PosteriorBatch& posterior, std::size_t samples, double sigma_scale,
             Rng& rng) const;
  nn::Tensor warp_inputs(const nn::Tensor& inputs, const Draws& draws, Rng& rng) const;
  PosteriorBatch posterior_from(const nn::Tensor& head, const LossOptions& options,
                                std::size_t n) const;
  std::size_t resolve_samples(std::optional<std::size_t> samples, std::size_t fallback) const;
  double kl_mean(const PosteriorBatch& posterior, std::vector<double>* d_mu,
                 std::vector<double>* d_sigma) const;

  ModelSpec spec_;
  std::unique_ptr<warp::Transform> transform_;
  std::unique_ptr<nn::Network> classifier_;
  std::unique_ptr<nn::Network> localizer_;
};

}  // namespace pstn::model
