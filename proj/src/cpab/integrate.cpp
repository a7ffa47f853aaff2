#include "pstn/cpab/integrate.hpp"

#include <algorithm>
#include <array>

#include "pstn/common/error.hpp"
#include "pstn/warp/transform.hpp"

namespace pstn::cpab {
namespace {

void check_inputs(std::size_t dim, std::span<const double> points, std::size_t n_steps) {
  if (n_steps == 0) throw ConfigError("integration needs at least one step");
  if (points.size() % dim != 0) throw ConfigError("point buffer is not a multiple of dim");
}

}  // namespace

std::vector<double> integrate(const VelocityField& field, std::span<const double> points,
                              std::size_t n_steps, double duration) {
  const std::size_t d = field.dim();
  check_inputs(d, points, n_steps);
  const double h = duration / static_cast<double>(n_steps);
  std::vector<double> out(points.begin(), points.end());
  std::array<double, 2> x{}, stage{}, k1{}, k2{}, k3{}, k4{};

  for (std::size_t p = 0; p < out.size(); p += d) {
    std::copy_n(out.begin() + p, d, x.begin());
    for (std::size_t step = 0; step < n_steps; ++step) {
      field.evaluate({x.data(), d}, k1);
      for (std::size_t i = 0; i < d; ++i) stage[i] = x[i] + 0.5 * h * k1[i];
      field.evaluate({stage.data(), d}, k2);
      for (std::size_t i = 0; i < d; ++i) stage[i] = x[i] + 0.5 * h * k2[i];
      field.evaluate({stage.data(), d}, k3);
      for (std::size_t i = 0; i < d; ++i) stage[i] = x[i] + h * k3[i];
      field.evaluate({stage.data(), d}, k4);
      for (std::size_t i = 0; i < d; ++i) {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        x[i] = std::clamp(x[i], 0.0, 1.0);
      }
    }
    std::copy_n(x.begin(), d, out.begin() + p);
  }
  return out;
}

std::vector<double> integrate(const Tessellation& tessellation, const ConstraintBasis& basis,
                              std::span<const double> theta, std::span<const double> points,
                              std::size_t n_steps) {
  warp::require_finite_theta(theta);
  return integrate(VelocityField(tessellation, basis, theta), points, n_steps);
}

Flow integrate_with_grad(const Tessellation& tessellation, const ConstraintBasis& basis,
                         std::span<const double> theta, std::span<const double> points,
                         std::size_t n_steps) {
  warp::require_finite_theta(theta);
  const VelocityField field(tessellation, basis, theta);
  const std::size_t d = tessellation.dim();
  const std::size_t D = basis.dim();
  const std::size_t ppc = tessellation.params_per_cell();
  check_inputs(d, points, n_steps);
  const double h = 1.0 / static_cast<double>(n_steps);
  const Eigen::MatrixXd& B = basis.basis();

  Flow flow{std::vector<double>(points.begin(), points.end()),
            std::vector<double>(points.size() * D, 0.0)};

  // Per-stage buffers: position, velocity, sensitivity (d x D) and its rate.
  std::array<double, 2> x{}, stage{}, vel{};
  std::vector<double> S(d * D), S_stage(d * D), K(d * D), S_acc(d * D);

  // K = dv/dx * S_in + dv/dtheta at position `at`; returns velocity in `vel`.
  auto rates = [&](std::span<const double> at, std::span<const double> S_in) {
    const std::size_t cell = tessellation.cell_of(at);
    field.evaluate_in(cell, at, vel);
    const std::span<const double> a = field.cell_params(cell);
    for (std::size_t i = 0; i < d; ++i) {
      double* Ki = K.data() + i * D;
      std::fill(Ki, Ki + D, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        const double aij = a[i * (d + 1) + j];
        const double* Sj = S_in.data() + j * D;
        for (std::size_t k = 0; k < D; ++k) Ki[k] += aij * Sj[k];
      }
      // d v_i / d theta_k = sum_j B(row(i, j), k) * xt_j with xt = (x, 1).
      const Eigen::Index base = static_cast<Eigen::Index>(cell * ppc + i * (d + 1));
      for (std::size_t j = 0; j <= d; ++j) {
        const double xt = j < d ? at[j] : 1.0;
        for (std::size_t k = 0; k < D; ++k) {
          Ki[k] += B(base + static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * xt;
        }
      }
    }
  };

  for (std::size_t p = 0; p < flow.points.size(); p += d) {
    std::copy_n(flow.points.begin() + p, d, x.begin());
    std::fill(S.begin(), S.end(), 0.0);
    for (std::size_t step = 0; step < n_steps; ++step) {
      std::array<double, 2> acc{};
      // Stage weights of classic RK4 and the offsets used to form each stage.
      static constexpr std::array<double, 4> weight{1.0, 2.0, 2.0, 1.0};
      static constexpr std::array<double, 4> offset{0.0, 0.5, 0.5, 1.0};
      std::array<double, 2> prev_vel{};
      std::fill(S_acc.begin(), S_acc.end(), 0.0);
      for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t i = 0; i < d; ++i) stage[i] = x[i] + offset[s] * h * prev_vel[i];
        for (std::size_t q = 0; q < d * D; ++q) S_stage[q] = S[q] + offset[s] * h * K[q] * (s > 0);
        rates({stage.data(), d}, S_stage);
        for (std::size_t i = 0; i < d; ++i) acc[i] += weight[s] * vel[i];
        for (std::size_t q = 0; q < d * D; ++q) S_acc[q] += weight[s] * K[q];
        prev_vel = vel;
      }
      for (std::size_t i = 0; i < d; ++i) {
        x[i] += h / 6.0 * acc[i];
        const bool clamped = x[i] < 0.0 || x[i] > 1.0;
        x[i] = std::clamp(x[i], 0.0, 1.0);
        for (std::size_t k = 0; k < D; ++k) {
          double& s_ik = S[i * D + k];
          s_ik = clamped ? 0.0 : s_ik + h / 6.0 * S_acc[i * D + k];
        }
      }
    }
    std::copy_n(x.begin(), d, flow.points.begin() + p);
    std::copy(S.begin(), S.end(), flow.jacobian.begin() + static_cast<std::ptrdiff_t>(p * D));
  }
  return flow;
}

}  // namespace pstn::cpab
