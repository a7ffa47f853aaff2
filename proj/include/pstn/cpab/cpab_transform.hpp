#pragma once

#include <memory>

#include "pstn/cpab/basis.hpp"
#include "pstn/cpab/integrate.hpp"
#include "pstn/warp/transform.hpp"

namespace pstn::cpab {

// Diffeomorphic warp: target pixel centres flow along v^theta for unit time
// and the source is sampled at the end points. The [-1, 1] grid is mapped to
// the unit domain of the tessellation and back.
class CpabTransform : public warp::Transform {
 public:
  CpabTransform(warp::GridShape shape, TessellationSpec spec, std::size_t n_steps = kDefaultSteps);

  std::string_view family() const override { return "diffeo"; }
  std::size_t param_dim() const override { return basis_.dim(); }
  const warp::GridShape& grid_shape() const override { return grid_.shape; }
  std::vector<double> sample_points(std::span<const double> theta) const override;
  std::vector<double> sample_points(std::span<const double> theta,
                                    std::vector<double>& jacobian) const override;

  const Tessellation& tessellation() const { return *tessellation_; }
  const ConstraintBasis& basis() const { return basis_; }
  std::size_t n_steps() const { return n_steps_; }

 private:
  warp::SampleGrid grid_;
  std::vector<double> unit_points_;
  std::unique_ptr<Tessellation> tessellation_;  // stable address for fields
  ConstraintBasis basis_;
  std::size_t n_steps_;
};

}  // namespace pstn::cpab
