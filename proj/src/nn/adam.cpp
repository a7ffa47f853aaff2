#include "pstn/nn/adam.hpp"

#include <cmath>
#include <sstream>

#include "pstn/common/error.hpp"

namespace pstn::nn {

Adam::Adam(std::vector<ParamRef> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const ParamRef& p : params_) {
    m_.emplace_back(p.tensor->size(), Scalar(0));
    v_.emplace_back(p.tensor->size(), Scalar(0));
  }
}

void Adam::zero_grad() {
  for (ParamRef& p : params_) p.tensor->zero_grad();
}

void Adam::step() {
  for (ParamRef& p : params_) {
    std::span<const Scalar> g = std::as_const(*p.tensor).grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        std::ostringstream msg;
        msg << "adam: non-finite gradient " << g[i] << " in " << p.name << "[" << i
            << "] at step " << step_ + 1;
        throw NumericError(msg.str());
      }
    }
  }

  ++step_;
  const double lr = options_.learning_rate;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));

  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& param = *params_[k].tensor;
    std::span<Scalar> w = param.values();
    std::span<const Scalar> g = std::as_const(param).grad();
    std::vector<Scalar>& m = m_[k];
    std::vector<Scalar>& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      double grad = g.empty() ? 0.0 : double(g[i]);
      if (options_.decoupled_weight_decay) {
        w[i] = static_cast<Scalar>(w[i] - lr * options_.weight_decay * w[i]);
      } else {
        grad += options_.weight_decay * w[i];
      }
      m[i] = static_cast<Scalar>(b1 * m[i] + (1.0 - b1) * grad);
      v[i] = static_cast<Scalar>(b2 * v[i] + (1.0 - b2) * grad * grad);
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] = static_cast<Scalar>(w[i] - lr * m_hat / (std::sqrt(v_hat) + options_.epsilon));
    }
  }
}

}  // namespace pstn::nn
