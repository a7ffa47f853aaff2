#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "pstn/cpab/tessellation.hpp"

namespace pstn::cpab {

// Orthonormal basis B of null(L): theta in R^D maps to raw per-cell affine
// parameters B * theta that satisfy every continuity and boundary constraint.
class ConstraintBasis {
 public:
  // Relative singular-value cutoff for the rank decision.
  static constexpr double kRankTolerance = 1e-9;

  // Throws ConfigError when the constraints leave no degrees of freedom.
  static ConstraintBasis build(const Tessellation& tessellation);

  const Eigen::MatrixXd& constraints() const { return constraints_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  std::size_t dim() const { return static_cast<std::size_t>(basis_.cols()); }
  std::size_t rank() const { return rank_; }

  // Raw parameters B * theta.
  std::vector<double> raw_params(std::span<const double> theta) const;

 private:
  Eigen::MatrixXd constraints_;
  Eigen::MatrixXd basis_;
  std::size_t rank_ = 0;
};

// Continuous piecewise-affine velocity field v(x) = A_c [x; 1] for x in c.
class VelocityField {
 public:
  VelocityField(const Tessellation& tessellation, std::vector<double> raw_params);
  VelocityField(const Tessellation& tessellation, const ConstraintBasis& basis,
                std::span<const double> theta);

  const Tessellation& tessellation() const { return *tessellation_; }
  std::size_t dim() const { return tessellation_->dim(); }

  // Velocity using the affine map of `cell`.
  void evaluate_in(std::size_t cell, std::span<const double> x, std::span<double> v) const;
  void evaluate(std::span<const double> x, std::span<double> v) const;
  std::span<const double> cell_params(std::size_t cell) const;

 private:
  const Tessellation* tessellation_;
  std::vector<double> raw_;
};

}  // namespace pstn::cpab
