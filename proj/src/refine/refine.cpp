#include "geomap/refine.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace geomap::refine {

void RefineSpec::validate() const {
  if (!(lo > 0.0) || !(hi > lo)) throw ConfigError("refine domain must satisfy 0 < lo < hi");
  if (sweeps < 1) throw ConfigError("refine sweeps must be >= 1");
  if (!(tolerance > 0.0)) throw ConfigError("refine tolerance must be > 0");
  if (!(lambda_pen >= 0.0)) throw ConfigError("penalty weight must be >= 0");
}

LineMinimum golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  LineMinimum best{lo, std::numeric_limits<double>::infinity(), 0};
  auto eval = [&](double x) {
    double v = f(x);
    ++best.evaluations;
    if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    if (v < best.f) {
      best.f = v;
      best.x = x;
    }
    return v;
  };
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(d);
    }
  }
  eval(0.5 * (a + b));
  return best;
}

AlphaResult minimize_alpha(const AlphaObjective& objective, int dim, const RefineSpec& spec) {
  spec.validate();
  if (dim != 2 && dim != 3) throw ConfigError("alpha dimension must be 2 or 3");
  AlphaResult r;
  r.alpha.assign(dim, 1.0);
  auto safe = [&](const std::vector<double>& a) {
    ++r.evaluations;
    const double v = objective(a);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  r.objective_unrefined = safe(r.alpha);
  r.objective = r.objective_unrefined;
  bool any_finite = std::isfinite(r.objective);
  for (int sweep = 0; sweep < spec.sweeps; ++sweep) {
    for (int axis = 0; axis < dim; ++axis) {
      std::vector<double> trial = r.alpha;
      const LineMinimum m = golden_section(
          [&](double t) {
            trial[axis] = t;
            return objective(trial);
          },
          spec.lo, spec.hi, spec.tolerance);
      r.evaluations += m.evaluations;
      if (std::isfinite(m.f)) any_finite = true;
      const double margin = 1e-12 * std::max(1.0, std::abs(r.objective));
      if (std::isfinite(m.f) && (!std::isfinite(r.objective) || m.f < r.objective - margin)) {
        r.alpha[axis] = m.x;
        r.objective = m.f;
      }
    }
  }
  if (!any_finite) {
    std::cerr << "warning: refinement objective is non-finite at every probe; keeping alpha = 1\n";
    r.all_nonfinite = true;
    r.alpha.assign(dim, 1.0);
  }
  return r;
}

double fold_penalty(const MapField& map) {
  const JacobianField J = element_jacobians(map);
  double p = 0.0;
  for (int e = 0; e < J.size(); ++e) p += std::max(0.0, -J.det[e]) * map.grid->ref_measures(e);
  return p;
}

double task_objective(const losses::LossConfig& cfg, const MapField& map, const torch::Tensor& target,
                      double lambda_pen) {
  return losses::evaluate(cfg, map, target) + lambda_pen * fold_penalty(map);
}

Refined refine_alpha(std::shared_ptr<const SimplicialGrid> grid, const Points& psi, const surrogate::BoundaryMask& mask,
                     const MapObjective& objective, const RefineSpec& spec) {
  const int d = grid->dim;
  Refined out;
  out.result = minimize_alpha(
      [&](const std::vector<double>& alpha) { return objective(surrogate::apply_boundary(grid, psi, mask, alpha)); }, d,
      spec);
  out.map = surrogate::apply_boundary(grid, psi, mask, out.result.alpha);
  return out;
}

}  // namespace geomap::refine
