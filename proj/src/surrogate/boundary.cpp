#include "geomap/surrogate.hpp"

namespace geomap::surrogate {

torch::Tensor to_torch(const GridTensor& t, torch::Dtype dtype) {
  std::vector<std::int64_t> shape{1};
  shape.insert(shape.end(), t.shape.begin(), t.shape.end());
  std::int64_t n = 1;
  for (auto s : t.shape) n *= s;
  if (n != static_cast<std::int64_t>(t.data.size())) throw ConfigError("GridTensor data does not match its shape");
  return torch::from_blob(const_cast<double*>(t.data.data()), shape, torch::kFloat64).to(dtype).clone();
}

torch::Tensor displacement_rows(const torch::Tensor& psi) {
  const auto d = psi.size(1);
  return psi.reshape({d, -1}).t();
}

torch::Tensor BoundaryMask::values(const torch::Tensor& coords) const {
  if (kind == BoundaryKind::Free) return torch::ones({coords.size(0), 1}, coords.options());
  return (alpha_mask * coords * (1.0 - coords)).prod(1, true);
}

double BoundaryMask::value(const double* x, int dim) const {
  if (kind == BoundaryKind::Free) return 1.0;
  double b = 1.0;
  for (int a = 0; a < dim; ++a) b *= alpha_mask * x[a] * (1.0 - x[a]);
  return b;
}

torch::Tensor apply_boundary(const torch::Tensor& coords, const torch::Tensor& psi, const BoundaryMask& mask) {
  if (coords.sizes() != psi.sizes()) throw ConfigError("coords and displacement shapes differ");
  return coords + mask.values(coords) * psi;
}

MapField apply_boundary(std::shared_ptr<const SimplicialGrid> grid, const Points& psi, const BoundaryMask& mask,
                        const std::vector<double>& alpha) {
  const int d = grid->dim;
  if (psi.rows() != grid->num_vertices() || psi.cols() != d) throw ConfigError("displacement does not match grid");
  if (!alpha.empty() && static_cast<int>(alpha.size()) != d) throw ConfigError("alpha must have one entry per axis");
  MapField map;
  map.positions.resize(grid->num_vertices(), d);
  for (int v = 0; v < grid->num_vertices(); ++v) {
    const double* x = grid->vertices.row(v).data();
    const double b = mask.value(x, d);
    for (int a = 0; a < d; ++a) {
      const double s = alpha.empty() ? 1.0 : alpha[a];
      map.positions(v, a) = x[a] + b * s * psi(v, a);
    }
  }
  map.grid = std::move(grid);
  map.boundary_kind = mask.kind;
  map.provenance = Provenance::Surrogate;
  map.alpha = alpha;
  return map;
}

Points predict_displacement(MultiResUNet& model, const GridTensor& input) {
  torch::NoGradGuard no_grad;
  const auto dtype = model->parameters().front().scalar_type();
  const torch::Tensor psi = model->forward(to_torch(input, dtype));
  const torch::Tensor rows = displacement_rows(psi).to(torch::kFloat64).contiguous();
  if (!torch::isfinite(rows).all().item<bool>()) throw NumericalError("network produced non-finite displacement");
  Points out(rows.size(0), rows.size(1));
  std::copy(rows.data_ptr<double>(), rows.data_ptr<double>() + rows.numel(), out.data());
  return out;
}

}  // namespace geomap::surrogate
