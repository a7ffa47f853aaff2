#include "pstn/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <limits>

#include "pstn/common/error.hpp"

namespace pstn::nn {
namespace {

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void require_batched(const Tensor& t, std::string_view layer) {
  if (t.rank() < 2) {
    throw ConfigError(std::string(layer) + ": expected a batched tensor, got shape " +
                      to_string(t.shape()));
  }
}

}  // namespace

void Layer::require_cache(bool cached) const {
  if (!cached) throw StateError(std::string(kind()) + ": backward called before forward");
}

// ---- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
               std::size_t kernel_w, std::size_t stride)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w),
      stride_(stride),
      weight_({out_channels, in_channels, kernel_h, kernel_w}),
      bias_({out_channels}) {
  if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0) {
    throw ConfigError("conv: channels, kernel and stride must be positive");
  }
}

Shape Conv2d::output_shape(const Shape& input) const {
  Shape image = input;
  if (image.size() == 2) image.insert(image.begin() + 1, 1);
  if (image.size() != 3) {
    throw ConfigError(std::string(kind()) + ": unsupported input shape " + to_string(input));
  }
  if (image[0] != in_channels_) {
    throw ConfigError(std::string(kind()) + ": expected " + std::to_string(in_channels_) +
                      " input channels, got shape " + to_string(input));
  }
  if (image[1] < kernel_h_ || image[2] < kernel_w_) {
    throw ConfigError(std::string(kind()) + ": input " + to_string(input) +
                      " smaller than kernel");
  }
  const std::size_t out_h = (image[1] - kernel_h_) / stride_ + 1;
  const std::size_t out_w = (image[2] - kernel_w_) / stride_ + 1;
  if (input.size() == 2) return {out_channels_, out_w};
  return {out_channels_, out_h, out_w};
}

Shape Conv2d::as_image(const Shape& batch_shape) const {
  Shape item(batch_shape.begin() + 1, batch_shape.end());
  output_shape(item);  // validates
  if (item.size() == 2) return {batch_shape[0], item[0], 1, item[1]};
  return {batch_shape[0], item[0], item[1], item[2]};
}

Tensor Conv2d::run(const Tensor& input, std::vector<Scalar>* columns) const {
  require_batched(input, kind());
  const Shape image = as_image(input.shape());
  const std::size_t n = image[0], height = image[2], width = image[3];
  const std::size_t out_h = (height - kernel_h_) / stride_ + 1;
  const std::size_t out_w = (width - kernel_w_) / stride_ + 1;
  const std::size_t patch = in_channels_ * kernel_h_ * kernel_w_;
  const std::size_t positions = out_h * out_w;

  Shape out_shape = output_shape(input.item_shape());
  out_shape.insert(out_shape.begin(), n);
  Tensor output(out_shape);

  std::vector<Scalar> local;
  std::vector<Scalar>& cols = columns ? *columns : local;
  cols.assign(columns ? n * patch * positions : patch * positions, Scalar(0));

  ConstMatrixMap w(weight_.data(), out_channels_, patch);
  for (std::size_t b = 0; b < n; ++b) {
    Scalar* col = cols.data() + (columns ? b * patch * positions : 0);
    const Scalar* x = input.data() + b * in_channels_ * height * width;
    for (std::size_t c = 0; c < in_channels_; ++c) {
      for (std::size_t dy = 0; dy < kernel_h_; ++dy) {
        for (std::size_t dx = 0; dx < kernel_w_; ++dx) {
          Scalar* row = col + ((c * kernel_h_ + dy) * kernel_w_ + dx) * positions;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const Scalar* src = x + (c * height + oy * stride_ + dy) * width + dx;
            for (std::size_t ox = 0; ox < out_w; ++ox) row[oy * out_w + ox] = src[ox * stride_];
          }
        }
      }
    }
    MatrixMap out(output.data() + b * out_channels_ * positions, out_channels_, positions);
    out.noalias() = w * ConstMatrixMap(col, patch, positions);
    for (std::size_t o = 0; o < out_channels_; ++o) out.row(o).array() += bias_[o];
  }
  return output;
}

Tensor Conv2d::forward(const Tensor& input, Mode) {
  Tensor out = run(input, &columns_);
  cached_input_shape_ = input.shape();
  cached_ = true;
  return out;
}

Tensor Conv2d::infer(const Tensor& input) const { return run(input, nullptr); }

Tensor Conv2d::backward(const Tensor& grad_output) {
  require_cache(cached_);
  const Shape image = as_image(cached_input_shape_);
  const std::size_t n = image[0], height = image[2], width = image[3];
  const std::size_t out_h = (height - kernel_h_) / stride_ + 1;
  const std::size_t out_w = (width - kernel_w_) / stride_ + 1;
  const std::size_t patch = in_channels_ * kernel_h_ * kernel_w_;
  const std::size_t positions = out_h * out_w;
  if (grad_output.size() != n * out_channels_ * positions) {
    throw ConfigError("conv: gradient shape " + to_string(grad_output.shape()) +
                      " does not match forward output");
  }

  MatrixMap dw(weight_.grad().data(), out_channels_, patch);
  std::span<Scalar> db = bias_.grad();
  ConstMatrixMap w(weight_.data(), out_channels_, patch);
  Tensor grad_input(cached_input_shape_);
  RowMatrix dcol(patch, positions);

  for (std::size_t b = 0; b < n; ++b) {
    ConstMatrixMap g(grad_output.data() + b * out_channels_ * positions, out_channels_, positions);
    ConstMatrixMap col(columns_.data() + b * patch * positions, patch, positions);
    dw.noalias() += g * col.transpose();
    for (std::size_t o = 0; o < out_channels_; ++o) db[o] += g.row(o).sum();
    dcol.noalias() = w.transpose() * g;

    Scalar* dx = grad_input.data() + b * in_channels_ * height * width;
    for (std::size_t c = 0; c < in_channels_; ++c) {
      for (std::size_t dy = 0; dy < kernel_h_; ++dy) {
        for (std::size_t dxk = 0; dxk < kernel_w_; ++dxk) {
          const Scalar* row = dcol.data() + ((c * kernel_h_ + dy) * kernel_w_ + dxk) * positions;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            Scalar* dst = dx + (c * height + oy * stride_ + dy) * width + dxk;
            for (std::size_t ox = 0; ox < out_w; ++ox) dst[ox * stride_] += row[oy * out_w + ox];
          }
        }
      }
    }
  }
  return grad_input;
}

std::vector<ParamRef> Conv2d::parameters() { return {{"weight", &weight_}, {"bias", &bias_}}; }

// ---- Dense ----------------------------------------------------------------

Dense::Dense(std::size_t in_features, std::size_t out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_({out_features, in_features}),
      bias_({out_features}) {
  if (in_features == 0 || out_features == 0) throw ConfigError("dense: sizes must be positive");
}

Shape Dense::output_shape(const Shape& input) const {
  if (input.size() != 1 || input[0] != in_features_) {
    throw ConfigError("dense: expected input [" + std::to_string(in_features_) + "], got " +
                      to_string(input));
  }
  return {out_features_};
}

Tensor Dense::infer(const Tensor& input) const {
  require_batched(input, kind());
  output_shape(input.item_shape());
  const std::size_t n = input.dim(0);
  Tensor output({n, out_features_});
  MatrixMap out(output.data(), n, out_features_);
  out.noalias() = ConstMatrixMap(input.data(), n, in_features_) *
                  ConstMatrixMap(weight_.data(), out_features_, in_features_).transpose();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out_features_; ++o) out(i, o) += bias_[o];
  }
  return output;
}

Tensor Dense::forward(const Tensor& input, Mode) {
  Tensor out = infer(input);
  input_ = input;
  cached_ = true;
  return out;
}

Tensor Dense::backward(const Tensor& grad_output) {
  require_cache(cached_);
  const std::size_t n = input_.dim(0);
  if (grad_output.size() != n * out_features_) {
    throw ConfigError("dense: gradient shape " + to_string(grad_output.shape()) +
                      " does not match forward output");
  }
  ConstMatrixMap g(grad_output.data(), n, out_features_);
  ConstMatrixMap x(input_.data(), n, in_features_);
  MatrixMap(weight_.grad().data(), out_features_, in_features_).noalias() += g.transpose() * x;
  std::span<Scalar> db = bias_.grad();
  for (std::size_t o = 0; o < out_features_; ++o) db[o] += g.col(o).sum();

  Tensor grad_input(input_.shape());
  MatrixMap(grad_input.data(), n, in_features_).noalias() =
      g * ConstMatrixMap(weight_.data(), out_features_, in_features_);
  return grad_input;
}

std::vector<ParamRef> Dense::parameters() { return {{"weight", &weight_}, {"bias", &bias_}}; }

// ---- MaxPool2d ------------------------------------------------------------

MaxPool2d::MaxPool2d(std::size_t window_h, std::size_t window_w)
    : window_h_(window_h), window_w_(window_w) {
  if (window_h == 0 || window_w == 0) throw ConfigError("maxpool: window must be positive");
}

Shape MaxPool2d::output_shape(const Shape& input) const {
  if (input.size() == 2 && window_h_ == 1) {
    if (input[1] < window_w_) throw ConfigError("maxpool: input smaller than window");
    return {input[0], input[1] / window_w_};
  }
  if (input.size() != 3) {
    throw ConfigError(std::string(kind()) + ": unsupported input shape " + to_string(input));
  }
  if (input[1] < window_h_ || input[2] < window_w_) {
    throw ConfigError("maxpool: input smaller than window");
  }
  return {input[0], input[1] / window_h_, input[2] / window_w_};
}

Tensor MaxPool2d::run(const Tensor& input, std::vector<std::size_t>* argmax) const {
  require_batched(input, kind());
  const Shape item = input.item_shape();
  Shape out_shape = output_shape(item);
  const std::size_t n = input.dim(0), channels = item[0];
  const std::size_t height = item.size() == 3 ? item[1] : 1;
  const std::size_t width = item.back();
  const std::size_t out_h = height / window_h_, out_w = width / window_w_;
  out_shape.insert(out_shape.begin(), n);
  Tensor output(out_shape);
  if (argmax) argmax->assign(output.size(), 0);

  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * channels; ++plane) {
    const std::size_t base = plane * height * width;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox, ++o) {
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        std::size_t best_index = base + oy * window_h_ * width + ox * window_w_;
        for (std::size_t dy = 0; dy < window_h_; ++dy) {
          for (std::size_t dx = 0; dx < window_w_; ++dx) {
            const std::size_t idx = base + (oy * window_h_ + dy) * width + ox * window_w_ + dx;
            if (input[idx] > best) {
              best = input[idx];
              best_index = idx;
            }
          }
        }
        output[o] = best;
        if (argmax) (*argmax)[o] = best_index;
      }
    }
  }
  return output;
}

Tensor MaxPool2d::forward(const Tensor& input, Mode) {
  Tensor out = run(input, &argmax_);
  cached_input_shape_ = input.shape();
  cached_ = true;
  return out;
}

Tensor MaxPool2d::infer(const Tensor& input) const { return run(input, nullptr); }

Tensor MaxPool2d::backward(const Tensor& grad_output) {
  require_cache(cached_);
  if (grad_output.size() != argmax_.size()) {
    throw ConfigError("maxpool: gradient does not match forward output");
  }
  Tensor grad_input(cached_input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) grad_input[argmax_[o]] += grad_output[o];
  return grad_input;
}

// ---- ReLU -----------------------------------------------------------------

Tensor ReLU::infer(const Tensor& input) const {
  Tensor out = input;
  for (Scalar& v : out.values()) v = v > Scalar(0) ? v : Scalar(0);
  return out;
}

Tensor ReLU::forward(const Tensor& input, Mode) {
  input_ = input;
  cached_ = true;
  return infer(input);
}

Tensor ReLU::backward(const Tensor& grad_output) {
  require_cache(cached_);
  Tensor grad_input(input_.shape());
  for (std::size_t i = 0; i < grad_input.size(); ++i) {
    grad_input[i] = input_[i] > Scalar(0) ? grad_output[i] : Scalar(0);
  }
  return grad_input;
}

// ---- Dropout --------------------------------------------------------------

Dropout::Dropout(double drop_probability, std::uint64_t seed)
    : p_(drop_probability), rng_(seed) {
  if (!(p_ >= 0.0 && p_ < 1.0)) throw ConfigError("dropout: probability must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& input, Mode mode) {
  Tensor out = input;
  mask_.assign(input.size(), Scalar(1));
  if (mode == Mode::train && p_ > 0.0) {
    const Scalar keep_scale = Scalar(1.0 / (1.0 - p_));
    for (std::size_t i = 0; i < out.size(); ++i) {
      mask_[i] = rng_.uniform() < p_ ? Scalar(0) : keep_scale;
      out[i] *= mask_[i];
    }
  }
  cached_ = true;
  return out;
}

Tensor Dropout::backward(const Tensor& grad_output) {
  require_cache(cached_);
  Tensor grad_input = grad_output;
  for (std::size_t i = 0; i < grad_input.size(); ++i) grad_input[i] *= mask_[i];
  return grad_input;
}

// ---- Flatten --------------------------------------------------------------

Shape Flatten::output_shape(const Shape& input) const { return {element_count(input)}; }

Tensor Flatten::infer(const Tensor& input) const {
  require_batched(input, kind());
  return input.reshaped({input.dim(0), input.size() / input.dim(0)});
}

Tensor Flatten::forward(const Tensor& input, Mode) {
  cached_input_shape_ = input.shape();
  cached_ = true;
  return infer(input);
}

Tensor Flatten::backward(const Tensor& grad_output) {
  require_cache(cached_);
  return grad_output.reshaped(cached_input_shape_);
}

}  // namespace pstn::nn
