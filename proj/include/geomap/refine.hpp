#pragma once

#include "geomap/geometry.hpp"
#include "geomap/losses.hpp"
#include "geomap/surrogate.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace geomap::refine {

struct RefineSpec {
  double lo = 0.5;
  double hi = 1.5;
  double lambda_pen = 10.0;
  int sweeps = 2;
  double tolerance = 1e-3;

  void validate() const;
};

struct LineMinimum {
  double x = 0.0;
  double f = 0.0;
  int evaluations = 0;
};

/// Golden-section search on [lo, hi] until the bracket is shorter than tol.
/// Non-finite values count as +inf. Returns the best probe seen.
LineMinimum golden_section(const std::function<double(double)>& f, double lo, double hi, double tol);

using AlphaObjective = std::function<double(const std::vector<double>& alpha)>;

struct AlphaResult {
  std::vector<double> alpha;
  double objective = 0.0;
  double objective_unrefined = 0.0;  ///< value at alpha = 1
  int evaluations = 0;
  bool all_nonfinite = false;
};

/// Alternating per-axis golden-section searches starting from alpha = 1.
/// A coordinate only moves when it lowers the objective by more than a relative 1e-12.
AlphaResult minimize_alpha(const AlphaObjective& objective, int dim, const RefineSpec& spec = {});

/// Sum over elements of max(0, -det J) times the reference measure.
double fold_penalty(const MapField& map);

/// Task loss plus lambda_pen * fold_penalty, in double precision.
double task_objective(const losses::LossConfig& cfg, const MapField& map, const torch::Tensor& target,
                      double lambda_pen);

struct Refined {
  MapField map;
  AlphaResult result;
};

using MapObjective = std::function<double(const MapField&)>;

/// u_alpha = x + B(x) (alpha ⊙ psi); optimizes alpha for `objective` and returns u_alpha*.
Refined refine_alpha(std::shared_ptr<const SimplicialGrid> grid, const Points& psi, const surrogate::BoundaryMask& mask,
                     const MapObjective& objective, const RefineSpec& spec = {});

}  // namespace geomap::refine
