#include "pstn/warp/grid.hpp"

#include "pstn/common/error.hpp"

namespace pstn::warp {

SampleGrid make_grid(const GridShape& shape) {
  if (shape.empty() || shape.size() > 2) throw ConfigError("sample grids are 1D or 2D");
  for (std::size_t n : shape) {
    if (n == 0) throw ConfigError("sample grid dimensions must be positive");
  }
  SampleGrid grid{shape, {}};
  if (shape.size() == 1) {
    grid.coords.reserve(shape[0]);
    for (std::size_t i = 0; i < shape[0]; ++i) grid.coords.push_back(to_coord(double(i), shape[0]));
    return grid;
  }
  const std::size_t height = shape[0], width = shape[1];
  grid.coords.reserve(2 * height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      grid.coords.push_back(to_coord(double(c), width));
      grid.coords.push_back(to_coord(double(r), height));
    }
  }
  return grid;
}

}  // namespace pstn::warp
