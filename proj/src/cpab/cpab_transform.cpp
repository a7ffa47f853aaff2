#include "pstn/cpab/cpab_transform.hpp"

#include "pstn/common/error.hpp"

namespace pstn::cpab {

CpabTransform::CpabTransform(warp::GridShape shape, TessellationSpec spec, std::size_t n_steps)
    : grid_(warp::make_grid(shape)),
      tessellation_(std::make_unique<Tessellation>(std::move(spec))),
      basis_(ConstraintBasis::build(*tessellation_)),
      n_steps_(n_steps) {
  if (tessellation_->dim() != grid_.dim()) {
    throw ConfigError("tessellation is " + std::to_string(tessellation_->dim()) +
                      "D but the data is " + std::to_string(grid_.dim()) + "D");
  }
  unit_points_.reserve(grid_.coords.size());
  for (double c : grid_.coords) unit_points_.push_back(0.5 * (c + 1.0));
}

std::vector<double> CpabTransform::sample_points(std::span<const double> theta) const {
  std::vector<double> pts = integrate(*tessellation_, basis_, theta, unit_points_, n_steps_);
  for (double& p : pts) p = 2.0 * p - 1.0;
  return pts;
}

std::vector<double> CpabTransform::sample_points(std::span<const double> theta,
                                                 std::vector<double>& jacobian) const {
  Flow flow = integrate_with_grad(*tessellation_, basis_, theta, unit_points_, n_steps_);
  for (double& p : flow.points) p = 2.0 * p - 1.0;
  for (double& j : flow.jacobian) j *= 2.0;
  jacobian = std::move(flow.jacobian);
  return flow.points;
}

}  // namespace pstn::cpab
