#include "pstn/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "pstn/common/error.hpp"

namespace pstn::nn {
namespace {

void require_logits(const Tensor& logits) {
  if (logits.rank() != 2 || logits.dim(0) == 0 || logits.dim(1) == 0) {
    throw ConfigError("logits must be [batch, classes], got " + to_string(logits.shape()));
  }
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  require_logits(logits);
  const std::size_t n = logits.dim(0), classes = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar* z = logits.data() + i * classes;
    Scalar* p = out.data() + i * classes;
    const double peak = *std::max_element(z, z + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(double(z[c]) - peak);
    for (std::size_t c = 0; c < classes; ++c) {
      p[c] = static_cast<Scalar>(std::exp(double(z[c]) - peak) / total);
    }
  }
  return out;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_logits(logits);
  const std::size_t n = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != n) {
    throw DataError("cross-entropy: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(n) + " rows");
  }
  LossResult result{0.0, Tensor(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DataError("cross-entropy: label " + std::to_string(label) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
    const Scalar* z = logits.data() + i * classes;
    const double peak = *std::max_element(z, z + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(double(z[c]) - peak);
    const double log_norm = peak + std::log(total);
    result.loss += (log_norm - z[label]) * inv_n;
    Scalar* g = result.grad.data() + i * classes;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(double(z[c]) - log_norm);
      g[c] = static_cast<Scalar>((p - (static_cast<int>(c) == label ? 1.0 : 0.0)) * inv_n);
    }
  }
  return result;
}

}  // namespace pstn::nn
