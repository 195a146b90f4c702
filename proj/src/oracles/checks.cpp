#include "geomap/losses.hpp"
#include "geomap/oracles.hpp"
#include "geomap/refine.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace geomap::oracles {

bool CheckReport::all_pass() const {
  for (const auto& l : lines)
    if (!l.pass) return false;
  return !lines.empty();
}

double test_map_mu_error(TestMap id, int res) {
  const MapField map = test_map(id, res);
  const BeltramiField mu = beltrami_per_element(map);
  const SimplicialGrid& grid = *map.grid;
  // Fourth-order central differences of the closed form.
  const double h = 1e-4;
  auto deriv = [&](double x, double y, int axis) {
    auto at = [&](double t) { return axis == 0 ? eval_test_map(id, x + t, y) : eval_test_map(id, x, y + t); };
    const auto p1 = at(h), m1 = at(-h), p2 = at(2 * h), m2 = at(-2 * h);
    std::array<double, 2> out{};
    for (int k = 0; k < 2; ++k) out[k] = (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h);
    return out;
  };
  double err = 0.0;
  for (int e = 0; e < grid.num_elements(); ++e) {
    double cx = 0.0, cy = 0.0;
    for (int k = 0; k < 3; ++k) {
      cx += grid.vertices(grid.elements(e, k), 0) / 3.0;
      cy += grid.vertices(grid.elements(e, k), 1) / 3.0;
    }
    const auto dx = deriv(cx, cy, 0), dy = deriv(cx, cy, 1);
    const Wirtinger w = wirtinger(dx[0], dy[0], dx[1], dy[1]);
    err = std::max(err, std::abs(mu.mu[e] - w.fzbar / w.fz));
  }
  return err;
}

std::vector<double> grid_search_alpha(const std::function<double(const std::vector<double>&)>& f, int dim, double lo,
                                      double hi, double tol) {
  std::vector<double> a(dim, lo), b(dim, hi), best(dim, 0.5 * (lo + hi));
  const int points = 21;
  while (true) {
    double cell = (b[0] - a[0]) / (points - 1);
    double best_f = std::numeric_limits<double>::infinity();
    std::vector<int> counter(dim, 0);
    std::vector<double> x(dim);
    while (true) {
      for (int i = 0; i < dim; ++i) x[i] = a[i] + (b[i] - a[i]) * counter[i] / (points - 1);
      const double v = f(x);
      if (std::isfinite(v) && v < best_f) {
        best_f = v;
        best = x;
      }
      int i = dim - 1;
      while (i >= 0 && ++counter[i] == points) counter[i--] = 0;
      if (i < 0) break;
    }
    if (cell < tol / 10.0) break;
    for (int i = 0; i < dim; ++i) {
      a[i] = std::max(lo, best[i] - cell);
      b[i] = std::min(hi, best[i] + cell);
    }
  }
  return best;
}

namespace {

double smooth_l1_direct(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += std::abs(v) < 1.0 ? 0.5 * v * v : std::abs(v) - 0.5;
  return s / r.size();
}

double density_loss_direct(const MapField& map, const std::vector<double>& pops) {
  const Eigen::VectorXd m = element_measures(map.grid->elements, map.positions);
  double P = 0.0, A = 0.0;
  for (std::size_t e = 0; e < pops.size(); ++e) {
    P += pops[e];
    A += m(e);
  }
  std::vector<double> r(pops.size());
  for (std::size_t e = 0; e < pops.size(); ++e) {
    const double f = losses::kMeasureFloor;
    r[e] = (m(e) >= f ? pops[e] / m(e) : pops[e] / f * (2.0 - m(e) / f)) - P / A;
  }
  return smooth_l1_direct(r);
}

MapField random_map(int res, int dim, std::mt19937_64& rng) {
  auto grid = std::make_shared<SimplicialGrid>(build_grid(res, dim));
  MapField map = identity_map(grid);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int v = 0; v < grid->num_vertices(); ++v)
    if (!grid->on_boundary(v))
      for (int a = 0; a < dim; ++a) map.positions(v, a) += u(rng) * grid->spacing();
  return map;
}

void mu_suite(CheckReport& report) {
  for (TestMap id : {TestMap::T1, TestMap::T2, TestMap::T3, TestMap::T4}) {
    const double e32 = test_map_mu_error(id, 32), e64 = test_map_mu_error(id, 64), e128 = test_map_mu_error(id, 128);
    const double r1 = e32 / e64, r2 = e64 / e128;
    std::ostringstream detail;
    detail << "err 32/64/128 = " << e32 << " / " << e64 << " / " << e128 << ", ratios " << r1 << " " << r2;
    const bool pass = r1 >= 1.8 && r1 <= 2.2 && r2 >= 1.8 && r2 <= 2.2;
    report.lines.push_back({"mu convergence " + to_string(id), pass, std::min(r1, r2), detail.str()});
  }
}

void loss_suite(CheckReport& report) {
  std::mt19937_64 rng(7);
  double worst_bc = 0.0, worst_deq = 0.0, worst_dem = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    {
      const MapField map = random_map(8, 2, rng);
      // Reconstruction loss against a random target mu.
      std::uniform_real_distribution<double> u(-0.3, 0.3);
      const int ne = map.grid->num_elements();
      std::vector<double> target(2 * ne);
      for (double& t : target) t = u(rng);
      const BeltramiField mu = beltrami_per_element(map);
      double direct = 0.0;
      for (int e = 0; e < ne; ++e) direct += std::norm(mu.mu[e] - std::complex<double>(target[2 * e], target[2 * e + 1]));
      direct /= ne;
      const double vec = losses::evaluate({losses::Task::Bc2d, 0.0}, map,
                                          torch::tensor(target, torch::kFloat64).view({ne, 2}));
      worst_bc = std::max(worst_bc, std::abs(direct - vec) / std::max(1e-300, std::abs(direct)));

      // Density equalization with the |mu|^2 term.
      std::uniform_real_distribution<double> pd(0.5, 2.0);
      std::vector<double> pops(ne);
      for (double& p : pops) p = pd(rng) * map.grid->ref_measures(0);
      double mu2 = 0.0;
      for (const auto& m : mu.mu) mu2 += std::norm(m);
      const double deq_direct = density_loss_direct(map, pops) + 0.1 * mu2 / ne;
      const double deq_vec = losses::evaluate({losses::Task::Deq2d, 0.1}, map, torch::tensor(pops, torch::kFloat64));
      worst_deq = std::max(worst_deq, std::abs(deq_direct - deq_vec) / std::abs(deq_direct));
    }
    {
      const MapField map = random_map(6, 3, rng);
      const int ne = map.grid->num_elements();
      std::uniform_real_distribution<double> pd(0.5, 2.0);
      std::vector<double> pops(ne);
      for (int e = 0; e < ne; ++e) pops[e] = pd(rng) * map.grid->ref_measures(e);
      const double direct = density_loss_direct(map, pops);
      const double vec = losses::evaluate({losses::Task::Dem3d, 0.0}, map, torch::tensor(pops, torch::kFloat64));
      worst_dem = std::max(worst_dem, std::abs(direct - vec) / std::abs(direct));
    }
  }
  report.lines.push_back({"loss bc2d direct vs vectorized", worst_bc <= 1e-12, worst_bc, "relative deviation"});
  report.lines.push_back({"loss deq2d direct vs vectorized", worst_deq <= 1e-12, worst_deq, "relative deviation"});
  report.lines.push_back({"loss dem3d direct vs vectorized", worst_dem <= 1e-12, worst_dem, "relative deviation"});
}

void refine_suite(CheckReport& report) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> centre(0.6, 1.4);
  for (int dim : {2, 3}) {
    double worst = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<double> c(dim), w(dim);
      for (int i = 0; i < dim; ++i) {
        c[i] = centre(rng);
        w[i] = 1.0 + i;
      }
      auto f = [&](const std::vector<double>& a) {
        double s = 0.0;
        for (int i = 0; i < dim; ++i) s += w[i] * (a[i] - c[i]) * (a[i] - c[i]);
        return s;
      };
      const auto golden = refine::minimize_alpha(f, dim);
      const auto grid = grid_search_alpha(f, dim, 0.5, 1.5, 1e-3);
      for (int i = 0; i < dim; ++i) worst = std::max(worst, std::abs(golden.alpha[i] - grid[i]));
    }
    report.lines.push_back({"refine separable quadratic d=" + std::to_string(dim), worst <= 1e-3, worst,
                            "max per-axis deviation from grid search"});
  }
}

}  // namespace

CheckReport brute_force_checks(const std::string& suite) {
  CheckReport report;
  report.suite = suite;
  const bool all = suite == "all";
  if (!all && suite != "mu" && suite != "loss" && suite != "refine")
    throw ConfigError("unknown check suite '" + suite + "' (expected mu, loss, refine or all)");
  if (all || suite == "mu") mu_suite(report);
  if (all || suite == "loss") loss_suite(report);
  if (all || suite == "refine") refine_suite(report);
  return report;
}

}  // namespace geomap::oracles
