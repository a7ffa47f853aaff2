#include "pstn/model/model.hpp"

#include <cmath>

#include "pstn/common/error.hpp"
#include "pstn/cpab/cpab_transform.hpp"
#include "pstn/nn/loss.hpp"
#include "pstn/warp/sampler.hpp"

namespace pstn::model {
namespace {

constexpr std::uint64_t kLocalizerSeedSalt = 0x5bd1e995u;

std::unique_ptr<nn::Network> build_net(const nn::Shape& input, const NetSpec& net,
                                       std::size_t outputs, std::uint64_t seed) {
  auto n = std::make_unique<nn::Network>(input, seed);
  const bool one_d = input.size() == 2;
  for (std::size_t c : net.conv_channels) {
    if (one_d) {
      n->conv1d(c, net.kernel).maxpool1d(net.pool).relu();
    } else {
      n->conv2d(c, net.kernel).maxpool2d(net.pool).relu();
    }
  }
  n->flatten();
  for (std::size_t h : net.hidden) n->dense(h).relu();
  n->dense(outputs);
  return n;
}

std::vector<nn::ParamRef> prefixed(nn::Network& net, const std::string& prefix) {
  std::vector<nn::ParamRef> out = net.parameters();
  for (auto& p : out) p.name = prefix + p.name;
  return out;
}

nn::Tensor item_of(const nn::Tensor& batch, std::size_t i) {
  const std::span<const Scalar> v = batch.slice(i);
  return nn::Tensor(batch.item_shape(), std::vector<Scalar>(v.begin(), v.end()));
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::cnn: return "cnn";
    case Variant::stn: return "stn";
    case Variant::pstn: return "pstn";
  }
  return "?";
}

std::string to_string(Family f) {
  switch (f) {
    case Family::none: return "none";
    case Family::affine: return "affine";
    case Family::diffeo: return "diffeo";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "cnn") return Variant::cnn;
  if (name == "stn") return Variant::stn;
  if (name == "pstn") return Variant::pstn;
  throw ConfigError("variant must be cnn, stn or pstn (got '" + name + "')");
}

Family parse_family(const std::string& name) {
  if (name == "none") return Family::none;
  if (name == "affine") return Family::affine;
  if (name == "diffeo") return Family::diffeo;
  throw ConfigError("family must be none, affine or diffeo (got '" + name + "')");
}

NetSpec default_classifier_net() { return NetSpec{{10, 20}, 5, 2, {50}}; }
NetSpec default_localizer_net() { return NetSpec{{8, 10}, 5, 2, {32}}; }

ModelSpec resolve(ModelSpec spec) {
  const std::size_t rank = spec.input_shape.size();
  if (rank != 2 && rank != 3) {
    throw ConfigError("input_shape must be [C, L] or [C, H, W], got " + nn::to_string(spec.input_shape));
  }
  if (spec.classes < 2) throw ConfigError("classes must be >= 2");
  if (spec.variant != Variant::cnn && spec.family == Family::none) {
    throw ConfigError("variant " + to_string(spec.variant) + " needs family affine or diffeo");
  }
  if (spec.family == Family::affine && rank != 3) {
    throw ConfigError("family affine needs 2D inputs; use diffeo for series");
  }
  if (!(spec.sigma_p > 0.0)) throw ConfigError("sigma_p must be positive");
  if (spec.sigma_noise < 0.0) throw ConfigError("sigma_noise must be non-negative");
  if (spec.s_train == 0 || spec.s_test == 0) throw ConfigError("s_train and s_test must be >= 1");
  if (spec.kl_weight < 0.0) throw ConfigError("kl_weight must be non-negative");
  if (spec.integration_steps == 0) throw ConfigError("integration_steps must be >= 1");
  if (spec.tessellation.cells.empty()) {
    spec.tessellation.cells = rank == 2 ? std::vector<std::size_t>{16} : std::vector<std::size_t>{2, 2};
  }
  if (spec.family == Family::diffeo && spec.tessellation.cells.size() != rank - 1) {
    throw ConfigError("tessellation dimension does not match the input");
  }
  return spec;
}

GaussianPosterior PosteriorBatch::at(std::size_t i) const {
  GaussianPosterior p;
  p.mu.assign(mu.begin() + i * dim, mu.begin() + (i + 1) * dim);
  p.sigma.assign(sigma.begin() + i * dim, sigma.begin() + (i + 1) * dim);
  return p;
}

Model::Model(ModelSpec spec) : spec_(resolve(std::move(spec))) {
  const warp::GridShape grid(spec_.input_shape.begin() + 1, spec_.input_shape.end());
  if (spec_.family == Family::affine) {
    transform_ = std::make_unique<warp::AffineTransform>(grid);
  } else if (spec_.family == Family::diffeo) {
    transform_ = std::make_unique<cpab::CpabTransform>(grid, spec_.tessellation,
                                                      spec_.integration_steps);
  }
  classifier_ = build_net(spec_.input_shape, spec_.classifier, spec_.classes, spec_.seed);
  if (spec_.variant != Variant::cnn) {
    const std::size_t d = transform_->param_dim();
    localizer_ = build_net(spec_.input_shape, spec_.localizer, 2 * d, spec_.seed ^ kLocalizerSeedSalt);
    // Identity-centred start: mu = 0 and sigma = sigma_p for every input.
    auto& head = dynamic_cast<nn::Dense&>(localizer_->back());
    head.weight().fill(Scalar(0));
    for (std::size_t j = 0; j < d; ++j) {
      head.bias()[j] = Scalar(0);
      head.bias()[d + j] = static_cast<Scalar>(2.0 * std::log(spec_.sigma_p));
    }
  }
}

std::vector<nn::ParamRef> Model::classifier_parameters() {
  return prefixed(*classifier_, "classifier.");
}

std::vector<nn::ParamRef> Model::localizer_parameters() {
  return localizer_ ? prefixed(*localizer_, "localizer.") : std::vector<nn::ParamRef>{};
}

std::vector<nn::ParamRef> Model::parameters() {
  std::vector<nn::ParamRef> out = classifier_parameters();
  for (auto& p : localizer_parameters()) out.push_back(std::move(p));
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor->size();
  return n;
}

void Model::zero_grad() {
  classifier_->zero_grad();
  if (localizer_) localizer_->zero_grad();
}

PosteriorBatch Model::posterior_from(const nn::Tensor& head, const LossOptions& options,
                                     std::size_t n) const {
  PosteriorBatch p;
  p.dim = theta_dim();
  p.mu.resize(n * p.dim);
  p.sigma.resize(n * p.dim);
  if (options.fixed_posterior) {
    std::fill(p.mu.begin(), p.mu.end(), options.fixed_posterior->first);
    std::fill(p.sigma.begin(), p.sigma.end(), options.fixed_posterior->second);
    return p;
  }
  head.check_finite("localizer output");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p.dim; ++j) {
      p.mu[i * p.dim + j] = head[i * 2 * p.dim + j];
      p.sigma[i * p.dim + j] = spec_.variant == Variant::pstn
                                   ? std::exp(0.5 * static_cast<double>(head[i * 2 * p.dim + p.dim + j]))
                                   : 0.0;
    }
  }
  return p;
}

PosteriorBatch Model::localize(const nn::Tensor& inputs) const {
  if (!localizer_) throw ConfigError("the cnn variant has no localizer");
  return posterior_from(localizer_->infer(inputs), {}, inputs.dim(0));
}

std::size_t Model::resolve_samples(std::optional<std::size_t> samples, std::size_t fallback) const {
  const std::size_t s = samples.value_or(fallback);
  if (s == 0) throw ConfigError("sample count must be >= 1");
  return spec_.variant == Variant::pstn ? s : 1;
}

Model::Draws Model::draw(const PosteriorBatch& posterior, std::size_t samples, double sigma_scale,
                         Rng& rng) const {
  Draws d;
  d.samples = samples;
  d.posterior = posterior;
  const std::size_t total = posterior.mu.size();
  d.eps.resize(samples * total);
  d.theta.resize(samples * total);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < total; ++k) {
      const double sigma = sigma_scale * posterior.sigma[k];
      double& e = d.eps[s * total + k];
      e = sigma > 0.0 ? rng.normal() : 0.0;
      d.theta[s * total + k] = posterior.mu[k] + sigma * e;
    }
  }
  return d;
}

nn::Tensor Model::warp_inputs(const nn::Tensor& inputs, const Draws& draws, Rng& rng) const {
  const std::size_t n = inputs.dim(0);
  const std::size_t dim = draws.posterior.dim;
  nn::Shape shape = inputs.shape();
  shape[0] = n * draws.samples;
  nn::Tensor out(shape);
  for (std::size_t s = 0; s < draws.samples; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> theta(draws.theta.data() + (s * n + i) * dim, dim);
      const nn::Tensor warped = augment(*transform_, item_of(inputs, i), theta, spec_.sigma_noise, rng);
      std::copy(warped.values().begin(), warped.values().end(), out.slice(s * n + i).begin());
    }
  }
  return out;
}

double Model::kl_mean(const PosteriorBatch& posterior, std::vector<double>* d_mu,
                      std::vector<double>* d_sigma) const {
  const std::size_t n = posterior.mu.size() / std::max<std::size_t>(posterior.dim, 1);
  const Prior prior{spec_.sigma_p};
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const KlResult r = kl_to_prior(posterior.at(i), prior);
    total += r.value;
    if (d_mu) {
      for (std::size_t j = 0; j < posterior.dim; ++j) {
        (*d_mu)[i * posterior.dim + j] += spec_.kl_weight * r.d_mu[j] / static_cast<double>(n);
        (*d_sigma)[i * posterior.dim + j] += spec_.kl_weight * r.d_sigma[j] / static_cast<double>(n);
      }
    }
  }
  return total / static_cast<double>(n);
}

ElboTerms Model::loss(const nn::Tensor& inputs, std::span<const int> labels, Rng& rng,
                      const LossOptions& options) const {
  const std::size_t n = inputs.dim(0);
  ElboTerms t;
  if (spec_.variant == Variant::cnn) {
    t.class_loss = nn::softmax_cross_entropy(classifier_->infer(inputs), labels).loss;
    t.loss = t.class_loss;
    return t;
  }
  const std::size_t samples = resolve_samples(options.samples, spec_.s_train);
  const PosteriorBatch post = posterior_from(
      options.fixed_posterior ? nn::Tensor() : localizer_->infer(inputs), options, n);
  const Draws draws = draw(post, samples, options.sigma_scale, rng);
  std::vector<int> rep;
  for (std::size_t s = 0; s < samples; ++s) rep.insert(rep.end(), labels.begin(), labels.end());
  t.class_loss = nn::softmax_cross_entropy(classifier_->infer(warp_inputs(inputs, draws, rng)), rep).loss;
  if (spec_.variant == Variant::pstn) t.kl = kl_mean(post, nullptr, nullptr);
  t.loss = t.class_loss + spec_.kl_weight * t.kl;
  if (!std::isfinite(t.loss)) throw NumericError("non-finite loss");
  return t;
}

ElboTerms Model::loss_and_backward(const nn::Tensor& inputs, std::span<const int> labels, Rng& rng,
                                   const LossOptions& options) {
  const std::size_t n = inputs.dim(0);
  if (labels.size() != n) throw DataError("label count does not match the batch");
  ElboTerms t;
  if (spec_.variant == Variant::cnn) {
    const nn::LossResult r = nn::softmax_cross_entropy(classifier_->forward(inputs, nn::Mode::train), labels);
    if (!std::isfinite(r.loss)) throw NumericError("non-finite loss");
    classifier_->backward(r.grad);
    t.class_loss = t.loss = r.loss;
    return t;
  }

  const bool learned = !options.fixed_posterior;
  const std::size_t samples = resolve_samples(options.samples, spec_.s_train);
  const std::size_t dim = theta_dim();
  const PosteriorBatch post = posterior_from(
      learned ? localizer_->forward(inputs, nn::Mode::train) : nn::Tensor(), options, n);
  const Draws draws = draw(post, samples, options.sigma_scale, rng);
  const nn::Tensor warped = warp_inputs(inputs, draws, rng);

  std::vector<int> rep;
  for (std::size_t s = 0; s < samples; ++s) rep.insert(rep.end(), labels.begin(), labels.end());
  const nn::LossResult r = nn::softmax_cross_entropy(classifier_->forward(warped, nn::Mode::train), rep);
  t.class_loss = r.loss;
  std::vector<double> d_mu(n * dim, 0.0), d_sigma(n * dim, 0.0);
  if (spec_.variant == Variant::pstn) {
    t.kl = kl_mean(post, learned ? &d_mu : nullptr, learned ? &d_sigma : nullptr);
  }
  t.loss = t.class_loss + spec_.kl_weight * t.kl;
  if (!std::isfinite(t.loss)) throw NumericError("non-finite loss");

  const nn::Tensor grad_warped = classifier_->backward(r.grad);
  if (!learned) return t;

  // Chain d loss / d warped image through the sampler and the transform
  // Jacobian to theta, then through the reparametrisation to (mu, sigma).
  const nn::Shape item = inputs.item_shape();
  std::vector<double> jacobian;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = (s * n + i) * dim;
      const std::span<const double> theta(draws.theta.data() + k, dim);
      const std::vector<double> points = transform_->sample_points(theta, jacobian);
      std::vector<double> grad_points(points.size(), 0.0);
      warp::sample_backward(inputs.slice(i), item, points, grad_warped.slice(s * n + i), {}, grad_points);
      const std::vector<double> d_theta = warp::pullback(jacobian, grad_points, dim);
      for (std::size_t j = 0; j < dim; ++j) {
        d_mu[i * dim + j] += d_theta[j];
        d_sigma[i * dim + j] += options.sigma_scale * draws.eps[k + j] * d_theta[j];
      }
    }
  }

  nn::Tensor head_grad({n, 2 * dim});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      head_grad[i * 2 * dim + j] = static_cast<Scalar>(d_mu[i * dim + j]);
      if (spec_.variant == Variant::pstn) {
        // sigma = exp(logvar / 2)
        head_grad[i * 2 * dim + dim + j] =
            static_cast<Scalar>(0.5 * post.sigma[i * dim + j] * d_sigma[i * dim + j]);
      }
    }
  }
  localizer_->backward(head_grad);
  return t;
}

namespace {

nn::Tensor require_finite(nn::Tensor probabilities) {
  for (Scalar v : probabilities.values()) {
    if (!std::isfinite(v)) throw NumericError("non-finite class probability in predict");
  }
  return probabilities;
}

}  // namespace

nn::Tensor Model::predict(const nn::Tensor& inputs, Rng& rng, std::optional<std::size_t> samples,
                          double sigma_scale) const {
  const std::size_t n = inputs.dim(0);
  if (spec_.variant == Variant::cnn) return require_finite(nn::softmax(classifier_->infer(inputs)));
  const std::size_t s_count = resolve_samples(samples, spec_.s_test);
  const PosteriorBatch post = localize(inputs);
  nn::Tensor mean({n, spec_.classes});
  for (std::size_t s = 0; s < s_count; ++s) {
    const Draws draws = draw(post, 1, sigma_scale, rng);
    const nn::Tensor p = nn::softmax(classifier_->infer(warp_inputs(inputs, draws, rng)));
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += p[k];
  }
  for (Scalar& v : mean.values()) v /= static_cast<Scalar>(s_count);
  return require_finite(std::move(mean));
}

}  // namespace pstn::model
