#include "geomap/oracles.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>

namespace geomap::oracles {

namespace {

constexpr double kDensityFloor = 1e-12;

Eigen::SparseMatrix<double> stiffness(const SimplicialGrid& grid) {
  const int d = grid.dim;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(grid.num_elements()) * (d + 1) * (d + 1));
  for (int e = 0; e < grid.num_elements(); ++e) {
    const int* idx = grid.elements.row(e).data();
    Eigen::MatrixXd dx(d, d);
    for (int c = 0; c < d; ++c)
      for (int r = 0; r < d; ++r) dx(r, c) = grid.vertices(idx[c + 1], r) - grid.vertices(idx[0], r);
    const Eigen::MatrixXd inv = dx.inverse();
    Eigen::MatrixXd G(d + 1, d);
    G.bottomRows(d) = inv;
    G.row(0) = -inv.colwise().sum();
    const Eigen::MatrixXd K = grid.ref_measures(e) * G * G.transpose();
    for (int a = 0; a <= d; ++a)
      for (int b = 0; b <= d; ++b) triplets.emplace_back(idx[a], idx[b], K(a, b));
  }
  Eigen::SparseMatrix<double> K(grid.num_vertices(), grid.num_vertices());
  K.setFromTriplets(triplets.begin(), triplets.end());
  return K;
}

/// Structured-grid helper for gradients and multilinear interpolation.
struct Lattice {
  int dim;
  int n;
  double h;

  int stride(int axis) const {
    int s = 1;
    for (int a = dim - 1; a > axis; --a) s *= n;
    return s;
  }
  int index_along(int vertex, int axis) const { return (vertex / stride(axis)) % n; }

  /// v = -grad(rho) / rho at every vertex; normal components vanish on the boundary.
  Points velocity(const Eigen::VectorXd& rho) const {
    const int nv = static_cast<int>(rho.size());
    Points v(nv, dim);
    for (int i = 0; i < nv; ++i)
      for (int a = 0; a < dim; ++a) {
        const int k = index_along(i, a);
        if (k == 0 || k == n - 1) {
          v(i, a) = 0.0;
        } else {
          const int s = stride(a);
          v(i, a) = -(rho(i + s) - rho(i - s)) / (2.0 * h) / rho(i);
        }
      }
    return v;
  }

  void interpolate(const Points& field, const double* p, double* out) const {
    int base[3];
    double t[3];
    for (int a = 0; a < dim; ++a) {
      const double f = std::clamp(p[a], 0.0, 1.0) * (n - 1);
      base[a] = std::min(static_cast<int>(std::floor(f)), n - 2);
      t[a] = f - base[a];
    }
    for (int a = 0; a < dim; ++a) out[a] = 0.0;
    for (int corner = 0; corner < (1 << dim); ++corner) {
      double w = 1.0;
      int vertex = 0;
      for (int a = 0; a < dim; ++a) {
        const int bit = (corner >> (dim - 1 - a)) & 1;
        w *= bit ? t[a] : 1.0 - t[a];
        vertex = vertex * n + base[a] + bit;
      }
      if (w == 0.0) continue;
      for (int a = 0; a < dim; ++a) out[a] += w * field(vertex, a);
    }
  }
};

}  // namespace

DemResult dem_diffusion_solve(const ParamField& rho0, const DemOptions& options) {
  if (rho0.channels != 1) throw ConfigError("DEM needs a single-channel density");
  if (rho0.dim != 2 && rho0.dim != 3) throw ConfigError("DEM supports 2D and 3D densities");
  const int res = rho0.res.at(0);
  for (int r : rho0.res)
    if (r != res) throw ConfigError("DEM needs an isotropic grid");
  for (double v : rho0.values)
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("DEM needs a strictly positive density");
  if (options.max_steps < 0 || !(options.tolerance >= 0.0) || !(options.max_tracer_step > 0.0))
    throw ConfigError("invalid DEM options");

  const int d = rho0.dim;
  auto grid = std::make_shared<SimplicialGrid>(build_grid(res, d));
  const Lattice lat{d, res, grid->spacing()};
  const double dt = options.dt > 0.0 ? options.dt : 2.0 * lat.h * lat.h;

  const Eigen::VectorXd M = grid->vertex_weights();
  const Eigen::SparseMatrix<double> K = stiffness(*grid);
  const std::vector<double> populations = element_populations(*grid, rho0.values);

  DemResult out;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  if (options.explicit_euler) {
    double lambda_max = 0.0;
    for (int k = 0; k < K.outerSize(); ++k) {
      double row = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it) row += std::abs(it.value());
      lambda_max = std::max(lambda_max, row / M(k));
    }
    if (dt > 2.0 / lambda_max)
      out.warnings.push_back("explicit time step " + std::to_string(dt) + " exceeds the stability bound " +
                             std::to_string(2.0 / lambda_max));
  } else {
    Eigen::SparseMatrix<double> A = dt * K;
    for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += M(i);
    solver.compute(A);
    if (solver.info() != Eigen::Success) throw NumericalError("DEM diffusion system factorization failed");
  }

  MapField map = identity_map(grid);
  map.boundary_kind = BoundaryKind::Square;
  map.provenance = Provenance::DemOracle;

  Eigen::VectorXd rho = Eigen::Map<const Eigen::VectorXd>(rho0.values.data(), rho0.values.size());
  auto mapped_std = [&]() { return element_density(map, populations).std_rho_tilde; };
  out.std_history.push_back(mapped_std());
  out.mass_history.push_back(M.dot(rho));
  bool warned_floor = false;

  std::vector<char> on_boundary_axis(static_cast<std::size_t>(grid->num_vertices()) * d, 0);
  for (int v = 0; v < grid->num_vertices(); ++v)
    for (int a = 0; a < d; ++a) {
      const int k = lat.index_along(v, a);
      on_boundary_axis[static_cast<std::size_t>(v) * d + a] = k == 0 || k == res - 1;
    }

  for (int step = 0; step < options.max_steps && out.std_history.back() >= options.tolerance; ++step) {
    Eigen::VectorXd next;
    if (options.explicit_euler) {
      next = rho - dt * (K * rho).cwiseQuotient(M);
    } else {
      next = solver.solve(M.cwiseProduct(rho));
    }
    if (!next.allFinite()) throw NumericalError("DEM density became non-finite at step " + std::to_string(step));
    for (int i = 0; i < next.size(); ++i)
      if (next(i) < kDensityFloor) {
        next(i) = kDensityFloor;
        if (!warned_floor) {
          out.warnings.push_back("density clamped at " + std::to_string(kDensityFloor));
          warned_floor = true;
        }
      }

    // Substep the tracer integration so no tracer crosses more than max_tracer_step cells.
    const Points v0 = lat.velocity(rho);
    const double vmax = std::max(v0.cwiseAbs().maxCoeff(), lat.velocity(next).cwiseAbs().maxCoeff());
    const int substeps = std::max(1, static_cast<int>(std::ceil(vmax * dt / (options.max_tracer_step * lat.h))));
    const double sub = dt / substeps;
    for (int s = 0; s < substeps; ++s) {
      const double theta0 = static_cast<double>(s) / substeps;
      const double theta_mid = (s + 0.5) / substeps;
      const Points va = lat.velocity((1.0 - theta0) * rho + theta0 * next);
      const Points vm = lat.velocity((1.0 - theta_mid) * rho + theta_mid * next);
      for (int i = 0; i < grid->num_vertices(); ++i) {
        double x[3], mid[3], w[3];
        for (int a = 0; a < d; ++a) x[a] = map.positions(i, a);
        lat.interpolate(va, x, w);
        for (int a = 0; a < d; ++a) {
          const bool pinned = on_boundary_axis[static_cast<std::size_t>(i) * d + a];
          mid[a] = pinned ? x[a] : std::clamp(x[a] + 0.5 * sub * w[a], 0.0, 1.0);
        }
        lat.interpolate(vm, mid, w);
        for (int a = 0; a < d; ++a) {
          const bool pinned = on_boundary_axis[static_cast<std::size_t>(i) * d + a];
          if (!pinned) map.positions(i, a) = std::clamp(x[a] + sub * w[a], 0.0, 1.0);
        }
      }
    }
    rho = std::move(next);
    out.steps = step + 1;
    out.std_history.push_back(mapped_std());
    out.mass_history.push_back(M.dot(rho));
  }
  out.converged = out.std_history.back() < options.tolerance;
  out.map = std::move(map);
  return out;
}

}  // namespace geomap::oracles
