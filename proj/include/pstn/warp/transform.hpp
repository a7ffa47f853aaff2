#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "pstn/nn/tensor.hpp"
#include "pstn/warp/grid.hpp"

namespace pstn::warp {

// A parametric family T_theta realised as inverse sampling: for each target
// pixel centre it yields the normalised source position to interpolate at.
class Transform {
 public:
  virtual ~Transform() = default;

  virtual std::string_view family() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual const GridShape& grid_shape() const = 0;

  // Sample positions [n_points x dim] for the target grid.
  virtual std::vector<double> sample_points(std::span<const double> theta) const = 0;
  // Same, also filling d points / d theta as a row-major
  // [n_points * dim x param_dim] matrix.
  virtual std::vector<double> sample_points(std::span<const double> theta,
                                            std::vector<double>& jacobian) const = 0;
};

// Rotation + isotropic scale + translation; theta = (angle, log scale, tx, ty).
class AffineTransform : public Transform {
 public:
  explicit AffineTransform(GridShape shape);

  std::string_view family() const override { return "affine"; }
  std::size_t param_dim() const override { return 4; }
  const GridShape& grid_shape() const override { return grid_.shape; }
  std::vector<double> sample_points(std::span<const double> theta) const override;
  std::vector<double> sample_points(std::span<const double> theta,
                                    std::vector<double>& jacobian) const override;

 private:
  SampleGrid grid_;
};

// Throws NumericError if theta has a NaN or infinity.
void require_finite_theta(std::span<const double> theta);

// grad_theta = J^T grad_points for a Jacobian laid out as in sample_points.
std::vector<double> pullback(std::span<const double> jacobian, std::span<const double> grad_points,
                             std::size_t param_dim);

// Warps one [C, spatial...] item onto the transform's grid.
nn::Tensor warp(const Transform& transform, const nn::Tensor& source,
                std::span<const double> theta);

struct WarpGradients {
  nn::Tensor source;          // d loss / d source
  std::vector<double> theta;  // d loss / d theta
};

WarpGradients warp_backward(const Transform& transform, const nn::Tensor& source,
                            std::span<const double> theta, const nn::Tensor& grad_output);

}  // namespace pstn::warp
