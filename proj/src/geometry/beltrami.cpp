#include "geomap/geometry.hpp"

#include <cmath>
#include <limits>

namespace geomap {

Wirtinger wirtinger(double a, double b, double c, double d) {
  // a = du1/dx, b = du1/dy, c = du2/dx, d = du2/dy
  return {0.5 * std::complex<double>(a + d, c - b), 0.5 * std::complex<double>(a - d, c + b)};
}

JacobianField element_jacobians(const MapField& map) {
  const SimplicialGrid& grid = *map.grid;
  const int dim = grid.dim;
  const int ne = grid.num_elements();
  if (map.positions.rows() != grid.num_vertices() || map.positions.cols() != dim)
    throw ConfigError("map positions do not match grid");

  JacobianField out;
  out.dim = dim;
  out.entries.resize(static_cast<std::size_t>(ne) * dim * dim);
  out.det.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const int* idx = grid.elements.row(e).data();
    if (dim == 2) {
      Eigen::Matrix2d dx, du;
      for (int c = 0; c < 2; ++c)
        for (int r = 0; r < 2; ++r) {
          dx(r, c) = grid.vertices(idx[c + 1], r) - grid.vertices(idx[0], r);
          du(r, c) = map.positions(idx[c + 1], r) - map.positions(idx[0], r);
        }
      if (dx.determinant() == 0.0) throw NumericalError("degenerate reference element " + std::to_string(e));
      const Eigen::Matrix2d J = du * dx.inverse();
      Eigen::Map<Eigen::Matrix<double, 2, 2, Eigen::RowMajor>>(out.entries.data() + 4 * e) = J;
      out.det[e] = J.determinant();
    } else {
      Eigen::Matrix3d dx, du;
      for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) {
          dx(r, c) = grid.vertices(idx[c + 1], r) - grid.vertices(idx[0], r);
          du(r, c) = map.positions(idx[c + 1], r) - map.positions(idx[0], r);
        }
      if (dx.determinant() == 0.0) throw NumericalError("degenerate reference element " + std::to_string(e));
      const Eigen::Matrix3d J = du * dx.inverse();
      Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(out.entries.data() + 9 * e) = J;
      out.det[e] = J.determinant();
    }
  }
  return out;
}

std::vector<double> jacobian_det(const MapField& map) { return element_jacobians(map).det; }

BeltramiField beltrami_per_element(const MapField& map) {
  if (map.dim() != 2) throw ConfigError("Beltrami coefficients are defined for planar maps only");
  const JacobianField J = element_jacobians(map);
  BeltramiField out;
  out.mu.resize(J.size());
  for (int e = 0; e < J.size(); ++e) {
    const double* m = J.at(e);
    const Wirtinger w = wirtinger(m[0], m[1], m[2], m[3]);
    if (w.fz == 0.0 && w.fzbar == 0.0) {
      out.mu[e] = 0.0;
    } else {
      out.mu[e] = w.fzbar / w.fz;
    }
  }
  return out;
}

std::vector<double> BeltramiField::modulus() const {
  std::vector<double> out(mu.size());
  for (std::size_t e = 0; e < mu.size(); ++e) out[e] = std::abs(mu[e]);
  return out;
}

Dilatation maximal_dilatation(const BeltramiField& mu) {
  Dilatation out;
  out.K.resize(mu.mu.size());
  for (std::size_t e = 0; e < mu.mu.size(); ++e) {
    const double m = std::abs(mu.mu[e]);
    if (m >= 1.0 || !std::isfinite(m)) {
      out.K[e] = std::numeric_limits<double>::infinity();
      out.infinite = true;
    } else {
      out.K[e] = (1.0 + m) / (1.0 - m);
    }
  }
  return out;
}

double beltrami_energy(const BeltramiField& mu, const SimplicialGrid& grid) {
  if (static_cast<int>(mu.mu.size()) != grid.num_elements()) throw ConfigError("mu size does not match grid");
  double energy = 0.0;
  for (int e = 0; e < grid.num_elements(); ++e) energy += std::norm(mu.mu[e]) * grid.ref_measures(e);
  return energy;
}

BeltramiField compose_beltrami(const BeltramiField& mu_f, const BeltramiField& mu_g, const MapField& map_g) {
  if (mu_f.mu.size() != mu_g.mu.size()) throw ConfigError("mu_f and mu_g sizes differ");
  const JacobianField J = element_jacobians(map_g);
  if (static_cast<std::size_t>(J.size()) != mu_f.mu.size()) throw ConfigError("map_g does not match mu size");
  BeltramiField out;
  out.mu.resize(mu_f.mu.size());
  for (std::size_t e = 0; e < mu_f.mu.size(); ++e) {
    const std::complex<double> mf = mu_f.mu[e], mg = mu_g.mu[e];
    if (std::abs(mg) >= 1.0) throw NumericalError("|mu_g| >= 1 at element " + std::to_string(e));
    const std::complex<double> denom = 1.0 - std::conj(mg) * mf;
    if (std::abs(denom) < 1e-12) throw NumericalError("composition denominator vanishes at element " + std::to_string(e));
    const double* m = J.at(static_cast<int>(e));
    const std::complex<double> gz = wirtinger(m[0], m[1], m[2], m[3]).fz;
    if (std::abs(gz) < 1e-300) throw NumericalError("g_z vanishes at element " + std::to_string(e));
    out.mu[e] = (mf - mg) / denom * (gz / std::conj(gz));
  }
  return out;
}

std::vector<std::complex<double>> vertex_average(const BeltramiField& mu, const SimplicialGrid& grid) {
  std::vector<std::complex<double>> sum(grid.num_vertices(), 0.0);
  std::vector<double> weight(grid.num_vertices(), 0.0);
  for (int e = 0; e < grid.num_elements(); ++e)
    for (int k = 0; k <= grid.dim; ++k) {
      const int v = grid.elements(e, k);
      sum[v] += mu.mu[e] * grid.ref_measures(e);
      weight[v] += grid.ref_measures(e);
    }
  for (int v = 0; v < grid.num_vertices(); ++v)
    if (weight[v] > 0.0) sum[v] /= weight[v];
  return sum;
}

}  // namespace geomap
