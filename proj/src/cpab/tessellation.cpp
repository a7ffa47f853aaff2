#include "pstn/cpab/tessellation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "pstn/common/error.hpp"

namespace pstn::cpab {

std::string to_string(Boundary b) {
  return b == Boundary::zero_velocity ? "zero_velocity" : "none";
}

Boundary parse_boundary(const std::string& name) {
  if (name == "zero_velocity") return Boundary::zero_velocity;
  if (name == "none") return Boundary::none;
  throw ConfigError("unknown boundary condition '" + name + "'");
}

Tessellation::Tessellation(TessellationSpec spec) : spec_(std::move(spec)) {
  if (spec_.cells.empty() || spec_.cells.size() > 2) {
    throw ConfigError("tessellations are 1D or 2D");
  }
  for (std::size_t n : spec_.cells) {
    if (n == 0) throw ConfigError("tessellation cell counts must be positive");
  }
}

std::size_t Tessellation::num_cells() const {
  return dim() == 1 ? spec_.cells[0] : 4 * spec_.cells[0] * spec_.cells[1];
}

namespace {

std::size_t axis_cell(double x, std::size_t n, double* local) {
  const double scaled = x * static_cast<double>(n);
  const double clamped = std::clamp(std::floor(scaled), 0.0, static_cast<double>(n - 1));
  if (local) *local = scaled - clamped;
  return static_cast<std::size_t>(clamped);
}

}  // namespace

std::size_t Tessellation::cell_of(std::span<const double> point) const {
  if (dim() == 1) return axis_cell(point[0], spec_.cells[0], nullptr);
  double u = 0.0, v = 0.0;
  const std::size_t nx = spec_.cells[0];
  const std::size_t ix = axis_cell(point[0], nx, &u);
  const std::size_t iy = axis_cell(point[1], spec_.cells[1], &v);
  const double dx = u - 0.5, dy = v - 0.5;
  std::size_t tri;
  if (std::abs(dx) > std::abs(dy)) {
    tri = dx > 0 ? 1 : 3;  // right : left
  } else {
    tri = dy > 0 ? 2 : 0;  // top : bottom
  }
  return 4 * (iy * nx + ix) + tri;
}

std::vector<std::array<double, 2>> Tessellation::cell_vertices(std::size_t cell) const {
  if (dim() == 1) {
    const double n = static_cast<double>(spec_.cells[0]);
    return {{cell / n, 0.0}, {(cell + 1) / n, 0.0}};
  }
  const std::size_t nx = spec_.cells[0];
  const double w = 1.0 / static_cast<double>(nx), h = 1.0 / static_cast<double>(spec_.cells[1]);
  const std::size_t rect = cell / 4, tri = cell % 4;
  const double x0 = static_cast<double>(rect % nx) * w, y0 = static_cast<double>(rect / nx) * h;
  const std::array<std::array<double, 2>, 4> corner{
      {{x0, y0}, {x0 + w, y0}, {x0 + w, y0 + h}, {x0, y0 + h}}};
  const std::array<double, 2> centre{x0 + 0.5 * w, y0 + 0.5 * h};
  return {corner[tri], corner[(tri + 1) % 4], centre};
}

std::vector<Tessellation::Facet> Tessellation::facets() const {
  std::vector<Facet> out;
  for (std::size_t c = 0; c < num_cells(); ++c) {
    const auto v = cell_vertices(c);
    if (dim() == 1) {
      out.push_back({c, v[0], v[0]});
      out.push_back({c, v[1], v[1]});
    } else {
      for (std::size_t k = 0; k < 3; ++k) out.push_back({c, v[k], v[(k + 1) % 3]});
    }
  }
  return out;
}

namespace {

// Facet identity independent of orientation, robust to rounding in the
// vertex coordinates.
using FacetKey = std::tuple<long, long, long, long>;

FacetKey key_of(std::array<double, 2> a, std::array<double, 2> b) {
  auto q = [](double x) { return std::lround(x * 1e9); };
  std::pair<long, long> pa{q(a[0]), q(a[1])}, pb{q(b[0]), q(b[1])};
  if (pb < pa) std::swap(pa, pb);
  return {pa.first, pa.second, pb.first, pb.second};
}

}  // namespace

std::vector<Tessellation::SharedFacet> Tessellation::shared_facets() const {
  std::map<FacetKey, std::vector<Facet>> groups;
  for (const Facet& f : facets()) groups[key_of(f.from, f.to)].push_back(f);
  std::vector<SharedFacet> shared;
  for (const auto& [key, group] : groups) {
    if (group.size() == 2) shared.push_back({group[0].cell, group[1].cell, group[0].from, group[0].to});
  }
  return shared;
}

Eigen::MatrixXd Tessellation::constraint_matrix() const {
  const std::size_t d = dim(), ppc = params_per_cell();
  std::vector<Eigen::VectorXd> rows;

  // Row for component i of v at point p in cell c, with sign.
  auto add_terms = [&](Eigen::VectorXd& row, std::size_t cell, std::size_t i,
                       const std::array<double, 2>& p, double sign) {
    const std::size_t base = cell * ppc + i * (d + 1);
    for (std::size_t j = 0; j < d; ++j) row[base + j] += sign * p[j];
    row[base + d] += sign;
  };

  std::map<FacetKey, std::vector<Facet>> groups;
  for (const Facet& f : facets()) groups[key_of(f.from, f.to)].push_back(f);

  for (const auto& [key, group] : groups) {
    const std::size_t endpoints = d == 1 ? 1 : 2;
    for (std::size_t e = 0; e < endpoints; ++e) {
      const std::array<double, 2>& p = e == 0 ? group[0].from : group[0].to;
      for (std::size_t i = 0; i < d; ++i) {
        if (group.size() == 2) {
          Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(raw_dim()));
          add_terms(row, group[0].cell, i, p, 1.0);
          add_terms(row, group[1].cell, i, p, -1.0);
          rows.push_back(std::move(row));
        } else if (spec_.boundary == Boundary::zero_velocity) {
          Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(raw_dim()));
          add_terms(row, group[0].cell, i, p, 1.0);
          rows.push_back(std::move(row));
        }
      }
    }
  }

  Eigen::MatrixXd L(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(raw_dim()));
  for (std::size_t r = 0; r < rows.size(); ++r) L.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return L;
}

}  // namespace pstn::cpab
