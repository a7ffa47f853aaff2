#include "pstn/warp/transform.hpp"

#include <cmath>
#include <sstream>

#include "pstn/common/error.hpp"
#include "pstn/warp/affine.hpp"
#include "pstn/warp/sampler.hpp"

namespace pstn::warp {

void require_finite_theta(std::span<const double> theta) {
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (!std::isfinite(theta[j])) {
      std::ostringstream msg;
      msg << "transform parameter " << j << " is non-finite (" << theta[j] << ")";
      throw NumericError(msg.str());
    }
  }
}

AffineTransform::AffineTransform(GridShape shape) : grid_(make_grid(shape)) {
  if (grid_.dim() != 2) throw ConfigError("the affine family is defined for 2D images only");
}

std::vector<double> AffineTransform::sample_points(std::span<const double> theta) const {
  std::vector<double> unused;
  return sample_points(theta, unused);
}

std::vector<double> AffineTransform::sample_points(std::span<const double> theta,
                                                   std::vector<double>& jacobian) const {
  require_finite_theta(theta);
  const AffineParams p = AffineParams::from_theta(theta);
  const double c = std::cos(p.angle), s = std::sin(p.angle);
  const std::size_t n = grid_.size();
  std::vector<double> points(2 * n);
  jacobian.assign(2 * n * 4, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid_.coords[2 * i], y = grid_.coords[2 * i + 1];
    const double rx = c * x - s * y;  // rotated, unscaled
    const double ry = s * x + c * y;
    points[2 * i] = p.scale * rx + p.tx;
    points[2 * i + 1] = p.scale * ry + p.ty;

    double* jx = jacobian.data() + (2 * i) * 4;
    double* jy = jx + 4;
    jx[0] = -p.scale * ry;  // d/d angle
    jy[0] = p.scale * rx;
    jx[1] = p.scale * rx;   // d/d log scale
    jy[1] = p.scale * ry;
    jx[2] = 1.0;
    jy[3] = 1.0;
  }
  return points;
}

std::vector<double> pullback(std::span<const double> jacobian, std::span<const double> grad_points,
                             std::size_t param_dim) {
  std::vector<double> g(param_dim, 0.0);
  for (std::size_t r = 0; r < grad_points.size(); ++r) {
    const double gp = grad_points[r];
    if (gp == 0.0) continue;
    const double* row = jacobian.data() + r * param_dim;
    for (std::size_t k = 0; k < param_dim; ++k) g[k] += row[k] * gp;
  }
  return g;
}

namespace {

nn::Shape output_item_shape(const Transform& transform, const nn::Tensor& source) {
  const GridShape& grid = transform.grid_shape();
  if (source.rank() != grid.size() + 1) {
    throw ConfigError("warp: source " + nn::to_string(source.shape()) + " does not match a " +
                      std::to_string(grid.size()) + "D transform");
  }
  nn::Shape shape{source.dim(0)};
  shape.insert(shape.end(), grid.begin(), grid.end());
  return shape;
}

}  // namespace

nn::Tensor warp(const Transform& transform, const nn::Tensor& source,
                std::span<const double> theta) {
  nn::Tensor out(output_item_shape(transform, source));
  const std::vector<double> points = transform.sample_points(theta);
  sample(source.values(), source.shape(), points, out.values());
  return out;
}

WarpGradients warp_backward(const Transform& transform, const nn::Tensor& source,
                            std::span<const double> theta, const nn::Tensor& grad_output) {
  std::vector<double> jacobian;
  const std::vector<double> points = transform.sample_points(theta, jacobian);
  WarpGradients grads{nn::Tensor(source.shape()), {}};
  std::vector<double> grad_points(points.size(), 0.0);
  sample_backward(source.values(), source.shape(), points, grad_output.values(),
                  grads.source.values(), grad_points);
  grads.theta = pullback(jacobian, grad_points, transform.param_dim());
  return grads;
}

}  // namespace pstn::warp
