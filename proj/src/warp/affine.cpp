#include "pstn/warp/affine.hpp"

#include <cmath>

#include "pstn/common/error.hpp"

namespace pstn::warp {

AffineParams AffineParams::from_theta(std::span<const double> theta) {
  if (theta.size() != 4) throw ConfigError("affine parameters need 4 values");
  return {theta[0], std::exp(theta[1]), theta[2], theta[3]};
}

std::array<double, 4> AffineParams::to_theta() const {
  return {angle, std::log(scale), tx, ty};
}

Matrix3 affine_matrix(const AffineParams& p) {
  const double c = p.scale * std::cos(p.angle);
  const double s = p.scale * std::sin(p.angle);
  return {{{c, -s, p.tx}, {s, c, p.ty}, {0.0, 0.0, 1.0}}};
}

Matrix3 affine_matrix_inverse(const AffineParams& p) {
  // (s R)^-1 = R^T / s, translation -(s R)^-1 t.
  const double c = std::cos(p.angle) / p.scale;
  const double s = std::sin(p.angle) / p.scale;
  return {{{c, s, -(c * p.tx + s * p.ty)}, {-s, c, -(-s * p.tx + c * p.ty)}, {0.0, 0.0, 1.0}}};
}

Matrix3 multiply(const Matrix3& a, const Matrix3& b) {
  Matrix3 out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
    }
  }
  return out;
}

double determinant(const Matrix3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

}  // namespace pstn::warp
