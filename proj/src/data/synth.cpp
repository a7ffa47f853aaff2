#include "pstn/data/synth.hpp"

#include <cmath>
#include <numbers>

#include "pstn/common/error.hpp"
#include "pstn/common/rng.hpp"
#include "pstn/cpab/cpab_transform.hpp"
#include "pstn/data/augment.hpp"

namespace pstn::data {
namespace {

constexpr std::size_t kShapeClasses = 10;
constexpr std::size_t kSeriesClasses = 8;

std::size_t resolved_size(const SynthSpec& spec) {
  if (spec.size) return spec.size;
  return spec.kind == SynthKind::warped_shapes_2d ? 16 : 64;
}

// Shapes are drawn in a centred box of normalised coordinates so small warps
// keep them inside the image. Strokes are one pixel wide at 16x16.
bool shape_pixel(std::size_t cls, double x, double y, double half_px) {
  const double r = 0.55;
  const auto on = [&](double v, double at) { return std::abs(v - at) <= half_px; };
  const auto inside = [&](double v) { return std::abs(v) <= r + 1e-9; };
  switch (cls) {
    case 0: return on(y, 0.0) && inside(x);                                  // horizontal bar
    case 1: return on(x, 0.0) && inside(y);                                  // vertical bar
    case 2: return (on(y, 0.0) && inside(x)) || (on(x, 0.0) && inside(y));   // plus
    case 3: return inside(x) && inside(y) && (on(x, y) || on(x, -y));       // X
    case 4: return inside(x) && inside(y) && (on(std::abs(x), r) || on(std::abs(y), r));  // square
    case 5: return (on(x, -r) && inside(y)) || (on(y, r) && inside(x));      // L
    case 6: return (on(y, -r) && inside(x)) || (on(x, 0.0) && inside(y));    // T
    case 7: return inside(x) && inside(y) && on(x, -y);                      // slash
    case 8: return inside(x) && inside(y) && on(x, y);                       // backslash
    case 9: return on(std::hypot(x, y), r);                                  // ring
    default: return false;
  }
}

double series_value(std::size_t cls, double t) {
  constexpr double pi = std::numbers::pi;
  const auto bump = [](double t, double at, double w) {
    return std::exp(-0.5 * (t - at) * (t - at) / (w * w));
  };
  switch (cls) {
    case 0: return std::sin(2 * pi * t);
    case 1: return std::sin(4 * pi * t);
    case 2: return t < 0.5 ? 1.0 : -1.0;
    case 3: return 1.0 - 4.0 * std::abs(t - 0.5);
    case 4: return bump(t, 0.35, 0.06);
    case 5: return bump(t, 0.65, 0.06);
    case 6: return bump(t, 0.3, 0.05) - bump(t, 0.7, 0.05);
    case 7: return std::sin(2 * pi * (1.0 + 3.0 * t) * t);
    default: return 0.0;
  }
}

void check_spec(const SynthSpec& spec) {
  if (spec.classes < 2 || spec.classes > synth_max_classes(spec.kind)) {
    throw ConfigError("synth classes must be in [2, " +
                      std::to_string(synth_max_classes(spec.kind)) + "]");
  }
  if (spec.warp_scale < 0.0 || spec.noise < 0.0) {
    throw ConfigError("synth warp_scale and noise must be non-negative");
  }
  if (resolved_size(spec) < 4) throw ConfigError("synth size must be >= 4");
}

}  // namespace

std::string to_string(SynthKind kind) {
  return kind == SynthKind::warped_shapes_2d ? "warped_shapes_2d" : "warped_series_1d";
}

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "warped_shapes_2d") return SynthKind::warped_shapes_2d;
  if (name == "warped_series_1d") return SynthKind::warped_series_1d;
  throw ConfigError("unknown synthetic dataset kind '" + name + "'");
}

std::size_t synth_max_classes(SynthKind kind) {
  return kind == SynthKind::warped_shapes_2d ? kShapeClasses : kSeriesClasses;
}

Dataset synth_templates(const SynthSpec& spec) {
  check_spec(spec);
  const std::size_t n = resolved_size(spec);
  const std::size_t c = spec.classes;
  Dataset ds;
  if (spec.kind == SynthKind::warped_shapes_2d) {
    ds.inputs = nn::Tensor({c, 1, n, n});
    const double half_px = 1.0 / static_cast<double>(n);  // half a pixel in [-1, 1] units
    for (std::size_t k = 0; k < c; ++k) {
      std::span<Scalar> img = ds.inputs.slice(k);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double x = warp::to_coord(static_cast<double>(j), n);
          const double y = warp::to_coord(static_cast<double>(i), n);
          img[i * n + j] = shape_pixel(k, x, y, half_px) ? Scalar(1) : Scalar(0);
        }
      }
    }
  } else {
    ds.inputs = nn::Tensor({c, 1, n});
    for (std::size_t k = 0; k < c; ++k) {
      std::span<Scalar> s = ds.inputs.slice(k);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<Scalar>(series_value(k, (static_cast<double>(i) + 0.5) / n));
      }
    }
  }
  for (std::size_t k = 0; k < c; ++k) {
    ds.labels.push_back(static_cast<int>(k));
    ds.class_names.push_back(std::to_string(k));
  }
  ds.num_classes = c;
  return ds;
}

Dataset synth_dataset(const SynthSpec& spec) {
  const Dataset templates = synth_templates(spec);
  const std::size_t c = spec.classes;
  if (spec.n < 2 * c) {
    throw ConfigError("synth n=" + std::to_string(spec.n) + " gives fewer than 2 examples per class");
  }
  const std::size_t side = resolved_size(spec);
  std::unique_ptr<warp::Transform> transform;
  if (spec.kind == SynthKind::warped_shapes_2d) {
    transform = std::make_unique<warp::AffineTransform>(warp::GridShape{side, side});
  } else {
    transform = std::make_unique<cpab::CpabTransform>(
        warp::GridShape{side}, cpab::TessellationSpec{{spec.cpab_cells}, cpab::Boundary::zero_velocity});
  }

  Rng rng(spec.seed);
  nn::Shape shape = templates.inputs.shape();
  shape[0] = spec.n;
  Dataset ds;
  ds.inputs = nn::Tensor(shape);
  const nn::Shape item = templates.item_shape();
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t k = i % c;
    const std::span<const Scalar> src = templates.inputs.slice(k);
    std::span<Scalar> dst = ds.inputs.slice(i);
    const std::vector<double> theta = draw_prior_theta(*transform, spec.warp_scale, rng);
    if (spec.warp_scale == 0.0) {
      std::copy(src.begin(), src.end(), dst.begin());
    } else {
      const nn::Tensor warped =
          warp::warp(*transform, nn::Tensor(item, std::vector<Scalar>(src.begin(), src.end())), theta);
      std::copy(warped.values().begin(), warped.values().end(), dst.begin());
    }
    if (spec.noise > 0.0) {
      for (Scalar& v : dst) v += static_cast<Scalar>(spec.noise * rng.normal());
    }
    ds.labels.push_back(static_cast<int>(k));
  }
  ds.num_classes = c;
  ds.class_names = templates.class_names;
  ds.validate();
  return ds;
}

}  // namespace pstn::data
