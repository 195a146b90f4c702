#include "geomap/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace geomap {

std::string to_string(BoundaryKind kind) { return kind == BoundaryKind::Square ? "square" : "free"; }

std::string to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::Analytic: return "analytic";
    case Provenance::Surrogate: return "surrogate";
    case Provenance::Lbs: return "lbs";
    case Provenance::DemOracle: return "dem_oracle";
  }
  return "analytic";
}

BoundaryKind boundary_kind_from_string(const std::string& s) {
  if (s == "square") return BoundaryKind::Square;
  if (s == "free") return BoundaryKind::Free;
  throw ConfigError("unknown boundary kind '" + s + "'");
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "analytic") return Provenance::Analytic;
  if (s == "surrogate") return Provenance::Surrogate;
  if (s == "lbs") return Provenance::Lbs;
  if (s == "dem_oracle") return Provenance::DemOracle;
  throw ConfigError("unknown provenance '" + s + "'");
}

namespace {

double simplex_measure(const Points& p, const int* idx, int dim) {
  if (dim == 2) {
    const double ax = p(idx[1], 0) - p(idx[0], 0), ay = p(idx[1], 1) - p(idx[0], 1);
    const double bx = p(idx[2], 0) - p(idx[0], 0), by = p(idx[2], 1) - p(idx[0], 1);
    return 0.5 * (ax * by - ay * bx);
  }
  Eigen::Matrix3d m;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) m(r, c) = p(idx[c + 1], r) - p(idx[0], r);
  return m.determinant() / 6.0;
}

}  // namespace

Eigen::VectorXd element_measures(const IndexArray& elements, const Points& positions) {
  const int dim = static_cast<int>(positions.cols());
  Eigen::VectorXd out(elements.rows());
  for (Eigen::Index e = 0; e < elements.rows(); ++e) out(e) = simplex_measure(positions, elements.row(e).data(), dim);
  return out;
}

SimplicialGrid build_grid(int res, int dim) {
  if (res < 2) throw ConfigError("grid resolution must be >= 2, got " + std::to_string(res));
  if (dim != 2 && dim != 3) throw ConfigError("grid dimension must be 2 or 3");

  SimplicialGrid grid;
  grid.dim = dim;
  grid.res = res;
  const int n = res;
  const double denom = static_cast<double>(n - 1);

  if (dim == 2) {
    grid.vertices.resize(n * n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        grid.vertices(i * n + j, 0) = i / denom;
        grid.vertices(i * n + j, 1) = j / denom;
      }
    grid.elements.resize(2 * (n - 1) * (n - 1), 3);
    int e = 0;
    for (int i = 0; i + 1 < n; ++i)
      for (int j = 0; j + 1 < n; ++j) {
        const int v00 = i * n + j, v10 = (i + 1) * n + j;
        const int v11 = (i + 1) * n + j + 1, v01 = i * n + j + 1;
        grid.elements.row(e++) << v00, v10, v11;
        grid.elements.row(e++) << v00, v11, v01;
      }
  } else {
    grid.vertices.resize(n * n * n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const int v = (i * n + j) * n + k;
          grid.vertices(v, 0) = i / denom;
          grid.vertices(v, 1) = j / denom;
          grid.vertices(v, 2) = k / denom;
        }
    // Each monotone lattice path from corner 000 to 111 spans one tetrahedron.
    std::array<std::array<int, 3>, 6> orders{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    grid.elements.resize(6 * (n - 1) * (n - 1) * (n - 1), 4);
    int e = 0;
    for (int i = 0; i + 1 < n; ++i)
      for (int j = 0; j + 1 < n; ++j)
        for (int k = 0; k + 1 < n; ++k) {
          for (const auto& order : orders) {
            std::array<int, 3> c{i, j, k};
            std::array<int, 4> tet{};
            tet[0] = (c[0] * n + c[1]) * n + c[2];
            for (int s = 0; s < 3; ++s) {
              ++c[order[s]];
              tet[s + 1] = (c[0] * n + c[1]) * n + c[2];
            }
            grid.elements.row(e) << tet[0], tet[1], tet[2], tet[3];
            if (simplex_measure(grid.vertices, grid.elements.row(e).data(), 3) < 0.0)
              std::swap(grid.elements(e, 2), grid.elements(e, 3));
            ++e;
          }
        }
  }
  grid.ref_measures = element_measures(grid.elements, grid.vertices);
  return grid;
}

SimplicialGrid with_vertices(const SimplicialGrid& grid, const Points& vertices) {
  if (vertices.rows() != grid.vertices.rows() || vertices.cols() != grid.vertices.cols())
    throw ConfigError("vertex array shape does not match grid");
  SimplicialGrid out = grid;
  out.vertices = vertices;
  out.ref_measures = element_measures(out.elements, out.vertices);
  if (out.ref_measures.minCoeff() <= 0.0) throw NumericalError("displaced reference grid has a non-positive element");
  return out;
}

bool SimplicialGrid::on_boundary(int vertex) const {
  const int n = res;
  int rem = vertex;
  for (int a = dim - 1; a >= 0; --a) {
    const int idx = rem % n;
    rem /= n;
    if (idx == 0 || idx == n - 1) return true;
  }
  return false;
}

std::vector<int> SimplicialGrid::boundary_vertices() const {
  std::vector<int> out;
  for (int v = 0; v < num_vertices(); ++v)
    if (on_boundary(v)) out.push_back(v);
  return out;
}

Eigen::VectorXd SimplicialGrid::vertex_weights() const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(num_vertices());
  const double share = 1.0 / (dim + 1);
  for (int e = 0; e < num_elements(); ++e)
    for (int k = 0; k <= dim; ++k) w(elements(e, k)) += share * ref_measures(e);
  return w;
}

MapField identity_map(std::shared_ptr<const SimplicialGrid> grid) {
  MapField map;
  map.positions = grid->vertices;
  map.grid = std::move(grid);
  map.boundary_kind = BoundaryKind::Square;
  map.provenance = Provenance::Analytic;
  return map;
}

}  // namespace geomap
