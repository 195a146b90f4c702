#pragma once

#include "geomap/common.hpp"

#include <complex>
#include <memory>
#include <vector>

namespace geomap {

/// Structured simplicial grid on the unit square or cube.
///
/// Vertex (i, j[, k]) has index (i * N + j) [* N + k] and coordinates
/// (i, j[, k]) / (N - 1); axis 0 is x. Each square cell is split along its
/// (i,j)->(i+1,j+1) diagonal; each cube is split into six tetrahedra that share
/// the (0,0,0)->(1,1,1) diagonal. All elements are positively oriented.
struct SimplicialGrid {
  int dim = 2;
  int res = 0;
  Points vertices;           ///< #V x dim
  IndexArray elements;       ///< #E x (dim + 1)
  Eigen::VectorXd ref_measures;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_elements() const { return static_cast<int>(elements.rows()); }
  double spacing() const { return 1.0 / (res - 1); }

  /// True when the vertex lies on the boundary of the unit domain (by index, not coordinates).
  bool on_boundary(int vertex) const;
  std::vector<int> boundary_vertices() const;

  /// Lumped P1 vertex weights: sum over incident elements of measure / (dim + 1).
  Eigen::VectorXd vertex_weights() const;
};

SimplicialGrid build_grid(int res, int dim);

/// Same connectivity with displaced reference vertices (used for jittered sampling).
/// Throws NumericalError when an element loses positive measure.
SimplicialGrid with_vertices(const SimplicialGrid& grid, const Points& vertices);

/// Per-element signed measures of a simplex mesh with the given vertex positions.
Eigen::VectorXd element_measures(const IndexArray& elements, const Points& positions);

/// Per-vertex mapped positions u(x).
struct MapField {
  std::shared_ptr<const SimplicialGrid> grid;
  Points positions;
  BoundaryKind boundary_kind = BoundaryKind::Free;
  Provenance provenance = Provenance::Analytic;
  std::vector<double> alpha;  ///< stretch vector applied by refinement, empty if none

  int dim() const { return grid->dim; }
};

MapField identity_map(std::shared_ptr<const SimplicialGrid> grid);

/// Per-element complex Beltrami coefficient.
struct BeltramiField {
  std::vector<std::complex<double>> mu;

  std::vector<double> modulus() const;
};

/// Wirtinger derivatives of a 2x2 Jacobian [[a, b], [c, d]] (row = output component).
struct Wirtinger {
  std::complex<double> fz;
  std::complex<double> fzbar;
};
Wirtinger wirtinger(double a, double b, double c, double d);

/// Per-element Jacobians of the affine map carrying each reference element to its image.
struct JacobianField {
  int dim = 2;
  std::vector<double> entries;  ///< dim*dim per element, row-major
  std::vector<double> det;

  const double* at(int element) const { return entries.data() + element * dim * dim; }
  int size() const { return static_cast<int>(det.size()); }
};

JacobianField element_jacobians(const MapField& map);
std::vector<double> jacobian_det(const MapField& map);

BeltramiField beltrami_per_element(const MapField& map);

struct Dilatation {
  std::vector<double> K;  ///< +inf where |mu| >= 1
  bool infinite = false;
};
Dilatation maximal_dilatation(const BeltramiField& mu);

/// Piecewise-constant quadrature of the integral of |mu|^2.
double beltrami_energy(const BeltramiField& mu, const SimplicialGrid& grid);

/// Beltrami coefficient of f o g^{-1}, pulled back to the elements of g.
BeltramiField compose_beltrami(const BeltramiField& mu_f, const BeltramiField& mu_g,
                               const MapField& map_g);

struct MetricField {
  int dim = 2;
  std::vector<double> g;  ///< J^T J per element, row-major
  std::vector<double> sqrt_det;
};
MetricField metric_tensor(const MapField& map);

/// Measure-weighted average of incident element values.
std::vector<std::complex<double>> vertex_average(const BeltramiField& mu, const SimplicialGrid& grid);

/// Element populations p_e = mean(vertex samples of e) * ref_measure_e.
std::vector<double> element_populations(const SimplicialGrid& grid, const std::vector<double>& vertex_density);

struct DensityStats {
  std::vector<double> rho;
  std::vector<double> rho_tilde;  ///< rho / mean(rho), unweighted mean over elements
  double std_rho_tilde = 0.0;
  int fold_count = 0;             ///< elements with mapped measure <= 0
};
DensityStats element_density(const MapField& map, const std::vector<double>& populations);

/// Population standard deviation.
double standard_deviation(const std::vector<double>& values);

}  // namespace geomap
