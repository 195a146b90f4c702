#include "geomap/oracles.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace geomap::oracles {

std::array<double, 4> lbs_coefficient(std::complex<double> mu) {
  const double re = mu.real(), im = mu.imag();
  const double s = 1.0 - std::norm(mu);
  if (!(s > 0.0)) throw ConfigError("|mu| must be < 1 for the Linear Beltrami Solver");
  const double a11 = ((1.0 - re) * (1.0 - re) + im * im) / s;
  const double a12 = -2.0 * im / s;
  const double a22 = ((1.0 + re) * (1.0 + re) + im * im) / s;
  return {a11, a12, a12, a22};
}

MapField lbs_solve(const BeltramiField& mu, std::shared_ptr<const SimplicialGrid> grid, const LbsOptions& options) {
  if (grid->dim != 2) throw ConfigError("the Linear Beltrami Solver is planar");
  const int nv = grid->num_vertices();
  const int ne = grid->num_elements();
  if (static_cast<int>(mu.mu.size()) != ne) throw ConfigError("mu must have one value per element");

  // Unknowns are the interior vertices; boundary vertices keep u = x.
  std::vector<int> unknown(nv, -1);
  int n = 0;
  for (int v = 0; v < nv; ++v)
    if (!grid->on_boundary(v)) unknown[v] = n++;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(ne) * 9);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
  for (int e = 0; e < ne; ++e) {
    const auto A = lbs_coefficient(mu.mu[e]);
    const int* idx = grid->elements.row(e).data();
    Eigen::Matrix2d dx;
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 2; ++r) dx(r, c) = grid->vertices(idx[c + 1], r) - grid->vertices(idx[0], r);
    const Eigen::Matrix2d inv = dx.inverse();
    // Barycentric gradients: rows of inv for vertices 1, 2; vertex 0 takes minus their sum.
    Eigen::Matrix<double, 3, 2> G;
    G.row(1) = inv.row(0);
    G.row(2) = inv.row(1);
    G.row(0) = -G.row(1) - G.row(2);
    const Eigen::Matrix2d Am = (Eigen::Matrix2d() << A[0], A[1], A[2], A[3]).finished();
    const Eigen::Matrix3d K = grid->ref_measures(e) * G * Am * G.transpose();
    for (int a = 0; a < 3; ++a) {
      const int ia = unknown[idx[a]];
      if (ia < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int ib = unknown[idx[b]];
        if (ib >= 0) {
          triplets.emplace_back(ia, ib, K(a, b));
        } else {
          for (int k = 0; k < 2; ++k) rhs(ia, k) -= K(a, b) * grid->vertices(idx[b], k);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> S(n, n);
  S.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::MatrixXd sol(n, 2);
  bool solved = false;
  if (!options.conjugate_gradient && n > 0) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(S);
    if (ldlt.info() == Eigen::Success) {
      sol = ldlt.solve(rhs);
      solved = ldlt.info() == Eigen::Success && sol.allFinite();
    }
  }
  if (!solved && n > 0) {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg(S);
    cg.setTolerance(options.cg_tolerance);
    cg.setMaxIterations(10 * n);
    sol = cg.solve(rhs);
    if (cg.info() != Eigen::Success || !sol.allFinite()) throw NumericalError("LBS system could not be solved");
  }

  MapField map;
  map.positions = grid->vertices;
  for (int v = 0; v < nv; ++v)
    if (unknown[v] >= 0) map.positions.row(v) = sol.row(unknown[v]);
  map.grid = std::move(grid);
  map.boundary_kind = BoundaryKind::Square;
  map.provenance = Provenance::Lbs;
  return map;
}

}  // namespace geomap::oracles
