#pragma once

#include "geomap/fieldgen.hpp"
#include "geomap/geometry.hpp"

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace geomap::oracles {

struct LbsOptions {
  bool conjugate_gradient = false;  ///< force the iterative solver
  double cg_tolerance = 1e-13;
};

/// Linear Beltrami Solver: P1 finite elements for div(A(mu) grad u_k) = 0 with u = x on the boundary.
MapField lbs_solve(const BeltramiField& mu, std::shared_ptr<const SimplicialGrid> grid, const LbsOptions& options = {});

/// The 2x2 coefficient matrix A(mu), row-major.
std::array<double, 4> lbs_coefficient(std::complex<double> mu);

struct DemOptions {
  int max_steps = 2000;
  double tolerance = 0.05;  ///< stop once Std(rho~) of the mapped mesh drops below this
  double dt = 0.0;          ///< 0 selects 2 h^2
  bool explicit_euler = false;
  double max_tracer_step = 0.5;  ///< substep so a tracer moves at most this many cells per substep
};

struct DemResult {
  MapField map;
  int steps = 0;
  bool converged = false;
  std::vector<double> std_history;   ///< Std(rho~) of the mapped mesh, entry 0 before any step
  std::vector<double> mass_history;  ///< lumped mass of the diffusing density
  std::vector<std::string> warnings;
};

/// Diffusion-driven density-equalizing map of the vertex density in rho0.
DemResult dem_diffusion_solve(const ParamField& rho0, const DemOptions& options = {});

struct CheckLine {
  std::string name;
  bool pass = false;
  double value = 0.0;  ///< max deviation or the measured ratio
  std::string detail;
};

struct CheckReport {
  std::string suite;
  std::vector<CheckLine> lines;
  bool all_pass() const;
};

/// Suites: "mu", "loss", "refine" or "all".
CheckReport brute_force_checks(const std::string& suite);

/// Per-element mu of a test map on an N^2 grid compared with mu from accurate numerical
/// derivatives of its closed form at element centroids; returns the max-norm error.
double test_map_mu_error(TestMap id, int res);

/// Nested 21-point grid search over [lo, hi] per axis (zooming until the cell is below tol).
std::vector<double> grid_search_alpha(const std::function<double(const std::vector<double>&)>& f, int dim, double lo,
                                      double hi, double tol);

}  // namespace geomap::oracles
