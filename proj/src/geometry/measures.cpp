#include "geomap/geometry.hpp"

#include <cmath>
#include <numeric>

namespace geomap {

MetricField metric_tensor(const MapField& map) {
  const JacobianField J = element_jacobians(map);
  const int d = J.dim;
  MetricField out;
  out.dim = d;
  out.g.assign(J.entries.size(), 0.0);
  out.sqrt_det.resize(J.size());
  for (int e = 0; e < J.size(); ++e) {
    const double* j = J.at(e);
    double* g = out.g.data() + e * d * d;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        double s = 0.0;
        for (int r = 0; r < d; ++r) s += j[r * d + a] * j[r * d + b];
        g[a * d + b] = s;
      }
    double det;
    if (d == 2) {
      det = g[0] * g[3] - g[1] * g[2];
    } else {
      det = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(g).determinant();
    }
    out.sqrt_det[e] = std::sqrt(std::max(det, 0.0));
  }
  return out;
}

std::vector<double> element_populations(const SimplicialGrid& grid, const std::vector<double>& vertex_density) {
  if (static_cast<int>(vertex_density.size()) != grid.num_vertices())
    throw ConfigError("density sample count does not match grid vertices");
  std::vector<double> pop(grid.num_elements());
  for (int e = 0; e < grid.num_elements(); ++e) {
    double s = 0.0;
    for (int k = 0; k <= grid.dim; ++k) s += vertex_density[grid.elements(e, k)];
    pop[e] = s / (grid.dim + 1) * grid.ref_measures(e);
  }
  return pop;
}

double standard_deviation(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / values.size());
}

DensityStats element_density(const MapField& map, const std::vector<double>& populations) {
  const SimplicialGrid& grid = *map.grid;
  if (static_cast<int>(populations.size()) != grid.num_elements())
    throw ConfigError("population count does not match grid elements");
  const Eigen::VectorXd measures = element_measures(grid.elements, map.positions);
  DensityStats out;
  out.rho.resize(populations.size());
  for (int e = 0; e < grid.num_elements(); ++e) {
    double m = measures(e);
    if (m <= 0.0) {
      ++out.fold_count;
      m = 1e-12 * grid.ref_measures(e);
    }
    out.rho[e] = populations[e] / m;
  }
  const double mean = std::accumulate(out.rho.begin(), out.rho.end(), 0.0) / out.rho.size();
  out.rho_tilde.resize(out.rho.size());
  for (std::size_t e = 0; e < out.rho.size(); ++e) out.rho_tilde[e] = out.rho[e] / mean;
  out.std_rho_tilde = standard_deviation(out.rho_tilde);
  return out;
}

}  // namespace geomap
