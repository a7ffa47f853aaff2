#pragma once

#include <span>
#include <vector>

#include "pstn/cpab/basis.hpp"

namespace pstn::cpab {

inline constexpr std::size_t kDefaultSteps = 100;

// phi(x; duration) for every point ([n x dim], domain coordinates) by fixed-step
// RK4 on dx/dt = v(x). Positions are clamped to the closed unit domain after
// every step.
std::vector<double> integrate(const VelocityField& field, std::span<const double> points,
                              std::size_t n_steps = kDefaultSteps, double duration = 1.0);

std::vector<double> integrate(const Tessellation& tessellation, const ConstraintBasis& basis,
                              std::span<const double> theta, std::span<const double> points,
                              std::size_t n_steps = kDefaultSteps);

struct Flow {
  std::vector<double> points;    // [n x dim]
  std::vector<double> jacobian;  // d points / d theta, row-major [n * dim x D]
};

// Integrates and differentiates the discrete RK4 recursion itself, so the
// Jacobian is exact for the computed map (up to cell-switch events). Clamped
// coordinates get zero sensitivity.
Flow integrate_with_grad(const Tessellation& tessellation, const ConstraintBasis& basis,
                         std::span<const double> theta, std::span<const double> points,
                         std::size_t n_steps = kDefaultSteps);

}  // namespace pstn::cpab
