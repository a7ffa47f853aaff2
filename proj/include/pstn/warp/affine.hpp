#pragma once

#include <array>
#include <span>

namespace pstn::warp {

using Matrix3 = std::array<std::array<double, 3>, 3>;

// Rotation, isotropic scale and translation in normalised coordinates.
struct AffineParams {
  double angle = 0.0;  // radians
  double scale = 1.0;  // > 0
  double tx = 0.0;
  double ty = 0.0;

  // Network-side vector (angle, log scale, tx, ty); the zero vector is the
  // identity and exp() keeps the scale positive.
  static AffineParams from_theta(std::span<const double> theta);
  std::array<double, 4> to_theta() const;
};

// [[s cos a, -s sin a, tx], [s sin a, s cos a, ty], [0, 0, 1]]
Matrix3 affine_matrix(const AffineParams& p);
Matrix3 affine_matrix_inverse(const AffineParams& p);

Matrix3 multiply(const Matrix3& a, const Matrix3& b);
double determinant(const Matrix3& m);

}  // namespace pstn::warp
