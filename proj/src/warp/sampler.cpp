#include "pstn/warp/sampler.hpp"

#include <cmath>

#include "pstn/common/error.hpp"

namespace pstn::warp {
namespace {

// Pixel positions that land within rounding distance of an integer snap to
// it, so the identity warp reproduces its input bit-exactly.
double snapped_pixel(double coord, std::size_t n) {
  const double p = to_pixel(coord, n);
  const double r = std::nearbyint(p);
  return std::abs(p - r) <= 1e-12 * std::max(1.0, std::abs(p)) ? r : p;
}

struct Axis {
  long lo;        // floor index
  double frac;    // weight of lo + 1
  double scale;   // d pixel / d coord
};

Axis locate(double coord, std::size_t n) {
  if (!std::isfinite(coord)) throw NumericError("sample: non-finite sample coordinate");
  const double p = snapped_pixel(coord, n);
  const double lo = std::floor(p);
  return {static_cast<long>(lo), p - lo, 0.5 * static_cast<double>(n)};
}

bool inside(long i, std::size_t n) { return i >= 0 && i < static_cast<long>(n); }

struct Layout {
  std::size_t channels;
  std::size_t height;  // 1 for 1D
  std::size_t width;
  std::size_t dim;
};

Layout layout_of(const nn::Shape& item_shape) {
  if (item_shape.size() == 2) return {item_shape[0], 1, item_shape[1], 1};
  if (item_shape.size() == 3) return {item_shape[0], item_shape[1], item_shape[2], 2};
  throw ConfigError("sample: source must be [C, L] or [C, H, W], got " + nn::to_string(item_shape));
}

}  // namespace

double InterpJacobianRow::weight_sum() const {
  double s = 0.0;
  for (std::size_t k = 0; k < count; ++k) s += weight[k];
  return s;
}

InterpJacobianRow interpolation_row(const GridShape& source, std::span<const double> point) {
  InterpJacobianRow row;
  if (source.size() != point.size()) throw ConfigError("interpolation_row: dimension mismatch");
  if (source.size() == 1) {
    const Axis ax = locate(point[0], source[0]);
    const std::array<std::pair<long, double>, 2> taps{{{ax.lo, 1.0 - ax.frac}, {ax.lo + 1, ax.frac}}};
    for (const auto& [i, w] : taps) {
      if (inside(i, source[0]) && w != 0.0) {
        row.index[row.count] = static_cast<std::size_t>(i);
        row.weight[row.count++] = w;
      }
    }
    return row;
  }
  const std::size_t height = source[0], width = source[1];
  const Axis ax = locate(point[0], width);
  const Axis ay = locate(point[1], height);
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const long x = ax.lo + dx, y = ay.lo + dy;
      const double w = (dx ? ax.frac : 1.0 - ax.frac) * (dy ? ay.frac : 1.0 - ay.frac);
      if (inside(x, width) && inside(y, height) && w != 0.0) {
        row.index[row.count] = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
        row.weight[row.count++] = w;
      }
    }
  }
  return row;
}

void sample(std::span<const Scalar> source, const nn::Shape& item_shape,
            std::span<const double> points, std::span<Scalar> out) {
  const Layout lay = layout_of(item_shape);
  const std::size_t n = points.size() / lay.dim;
  const std::size_t plane = lay.height * lay.width;
  if (source.size() != lay.channels * plane || out.size() != lay.channels * n ||
      points.size() != n * lay.dim) {
    throw ConfigError("sample: buffer sizes do not match shapes");
  }
  const GridShape src_shape = lay.dim == 1 ? GridShape{lay.width} : GridShape{lay.height, lay.width};
  for (std::size_t i = 0; i < n; ++i) {
    const InterpJacobianRow row = interpolation_row(src_shape, points.subspan(i * lay.dim, lay.dim));
    for (std::size_t c = 0; c < lay.channels; ++c) {
      const Scalar* s = source.data() + c * plane;
      double v = 0.0;
      for (std::size_t k = 0; k < row.count; ++k) v += row.weight[k] * s[row.index[k]];
      out[c * n + i] = static_cast<Scalar>(v);
    }
  }
}

void sample_backward(std::span<const Scalar> source, const nn::Shape& item_shape,
                     std::span<const double> points, std::span<const Scalar> grad_out,
                     std::span<Scalar> grad_source, std::span<double> grad_points) {
  const Layout lay = layout_of(item_shape);
  const std::size_t n = points.size() / lay.dim;
  const std::size_t plane = lay.height * lay.width;
  if (grad_out.size() != lay.channels * n) throw ConfigError("sample_backward: gradient size mismatch");
  const GridShape src_shape = lay.dim == 1 ? GridShape{lay.width} : GridShape{lay.height, lay.width};

  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> pt = points.subspan(i * lay.dim, lay.dim);
    if (!grad_source.empty()) {
      const InterpJacobianRow row = interpolation_row(src_shape, pt);
      for (std::size_t c = 0; c < lay.channels; ++c) {
        const double g = grad_out[c * n + i];
        for (std::size_t k = 0; k < row.count; ++k) {
          grad_source[c * plane + row.index[k]] += static_cast<Scalar>(row.weight[k] * g);
        }
      }
    }
    if (grad_points.empty()) continue;

    if (lay.dim == 1) {
      const Axis ax = locate(pt[0], lay.width);
      double d = 0.0;
      for (std::size_t c = 0; c < lay.channels; ++c) {
        const Scalar* s = source.data() + c * plane;
        const double v0 = inside(ax.lo, lay.width) ? s[ax.lo] : 0.0;
        const double v1 = inside(ax.lo + 1, lay.width) ? s[ax.lo + 1] : 0.0;
        d += grad_out[c * n + i] * (v1 - v0);
      }
      grad_points[i] += d * ax.scale;
      continue;
    }

    const Axis ax = locate(pt[0], lay.width);
    const Axis ay = locate(pt[1], lay.height);
    double dx = 0.0, dy = 0.0;
    for (std::size_t c = 0; c < lay.channels; ++c) {
      const Scalar* s = source.data() + c * plane;
      auto at = [&](long x, long y) -> double {
        return inside(x, lay.width) && inside(y, lay.height)
                   ? double(s[static_cast<std::size_t>(y) * lay.width + static_cast<std::size_t>(x)])
                   : 0.0;
      };
      const double v00 = at(ax.lo, ay.lo), v10 = at(ax.lo + 1, ay.lo);
      const double v01 = at(ax.lo, ay.lo + 1), v11 = at(ax.lo + 1, ay.lo + 1);
      const double g = grad_out[c * n + i];
      dx += g * ((1.0 - ay.frac) * (v10 - v00) + ay.frac * (v11 - v01));
      dy += g * ((1.0 - ax.frac) * (v01 - v00) + ax.frac * (v11 - v10));
    }
    grad_points[2 * i] += dx * ax.scale;
    grad_points[2 * i + 1] += dy * ay.scale;
  }
}

nn::Tensor sample(const nn::Tensor& source, std::span<const double> points) {
  const nn::Shape& shape = source.shape();
  const std::size_t dim = shape.size() - 1;
  if (dim < 1 || dim > 2) throw ConfigError("sample: source must be [C, L] or [C, H, W]");
  nn::Tensor out({shape[0], points.size() / dim});
  sample(source.values(), shape, points, out.values());
  return out;
}

}  // namespace pstn::warp
