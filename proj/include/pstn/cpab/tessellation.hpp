#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pstn::cpab {

enum class Boundary {
  zero_velocity,  // v = 0 on the domain boundary
  none,           // continuity constraints only
};

std::string to_string(Boundary b);
Boundary parse_boundary(const std::string& name);

struct TessellationSpec {
  // {cells} on [0, 1] or {cells_x, cells_y} rectangles on [0, 1]^2.
  std::vector<std::size_t> cells;
  Boundary boundary = Boundary::zero_velocity;
};

// Cell decomposition of the unit interval / square. In 2D every rectangle is
// split by its diagonals into four triangles ordered bottom, right, top, left.
// Each cell carries a row-major dim x (dim + 1) affine matrix, so the raw
// parameter vector has cells * dim * (dim + 1) entries.
class Tessellation {
 public:
  explicit Tessellation(TessellationSpec spec);

  const TessellationSpec& spec() const { return spec_; }
  std::size_t dim() const { return spec_.cells.size(); }
  std::size_t num_cells() const;
  std::size_t params_per_cell() const { return dim() * (dim() + 1); }
  std::size_t raw_dim() const { return num_cells() * params_per_cell(); }

  // Total on the closed domain; points outside are attributed to the nearest
  // boundary cell.
  std::size_t cell_of(std::span<const double> point) const;

  // Vertices of a cell: 2 endpoints (1D) or 3 corners (2D), each `dim` wide.
  std::vector<std::array<double, 2>> cell_vertices(std::size_t cell) const;

  // A facet (vertex in 1D, edge in 2D) shared by two cells.
  struct SharedFacet {
    std::size_t cell_a, cell_b;
    std::array<double, 2> from, to;  // identical in 1D
  };
  std::vector<SharedFacet> shared_facets() const;

  // Rows of L: velocity continuity at the endpoints of every shared facet and,
  // for zero_velocity, v = 0 at the endpoints of every boundary facet.
  Eigen::MatrixXd constraint_matrix() const;

 private:
  struct Facet {
    std::size_t cell;
    std::array<double, 2> from, to;
  };
  std::vector<Facet> facets() const;

  TessellationSpec spec_;
};

}  // namespace pstn::cpab
