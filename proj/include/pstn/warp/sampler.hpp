#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "pstn/nn/tensor.hpp"
#include "pstn/warp/grid.hpp"

namespace pstn::warp {

// Interpolation weights of one output sample: at most 4 (2D) or 2 (1D)
// in-domain source pixels. Neighbours outside the source are dropped (zero
// padding), so weights sum to 1 only for interior points.
struct InterpJacobianRow {
  std::array<std::size_t, 4> index{};  // flat index within one channel plane
  std::array<double, 4> weight{};
  std::size_t count = 0;

  double weight_sum() const;
};

InterpJacobianRow interpolation_row(const GridShape& source, std::span<const double> point);

// Linear (1D) / bilinear (2D) sampling of a [C, spatial...] item at
// normalised points [n x dim]. Writes [C, n] into `out`.
void sample(std::span<const Scalar> source, const nn::Shape& item_shape,
            std::span<const double> points, std::span<Scalar> out);

// Accumulates d/d source (if non-empty) and d/d points (if non-empty) given
// d/d out. Point gradients are in normalised coordinates.
void sample_backward(std::span<const Scalar> source, const nn::Shape& item_shape,
                     std::span<const double> points, std::span<const Scalar> grad_out,
                     std::span<Scalar> grad_source, std::span<double> grad_points);

// Tensor convenience: source [C, spatial...] -> [C, n].
nn::Tensor sample(const nn::Tensor& source, std::span<const double> points);

}  // namespace pstn::warp
