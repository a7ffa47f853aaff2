#pragma once

#include <cstddef>
#include <vector>

namespace pstn::warp {

// Spatial extent of a sample grid: {length} or {height, width}.
using GridShape = std::vector<std::size_t>;

// Pixel-centre coordinates in [-1, 1]^dim, row-major. Index i along an axis
// of size n maps to -1 + (2i + 1) / n. In 2D each point is stored (x, y) with
// x along the width (column) axis.
struct SampleGrid {
  GridShape shape;
  std::vector<double> coords;

  std::size_t dim() const { return shape.size(); }
  std::size_t size() const { return dim() ? coords.size() / dim() : 0; }
};

SampleGrid make_grid(const GridShape& shape);
inline SampleGrid make_grid(std::size_t length) { return make_grid(GridShape{length}); }
inline SampleGrid make_grid(std::size_t height, std::size_t width) {
  return make_grid(GridShape{height, width});
}

// Normalised coordinate <-> continuous pixel index along an axis of size n.
inline double to_pixel(double coord, std::size_t n) {
  return ((coord + 1.0) * static_cast<double>(n) - 1.0) * 0.5;
}
inline double to_coord(double pixel, std::size_t n) {
  return -1.0 + (2.0 * pixel + 1.0) / static_cast<double>(n);
}

}  // namespace pstn::warp
