#include "geomap/losses.hpp"

namespace geomap::losses {

using torch::indexing::Slice;

std::string to_string(Task task) {
  switch (task) {
    case Task::Bc2d: return "bc2d";
    case Task::Deq2d: return "deq2d";
    case Task::Dem3d: return "dem3d";
  }
  return "deq2d";
}

Task task_from_string(const std::string& s) {
  if (s == "bc2d") return Task::Bc2d;
  if (s == "deq2d") return Task::Deq2d;
  if (s == "dem3d") return Task::Dem3d;
  throw ConfigError("unknown task '" + s + "' (expected bc2d, deq2d or dem3d)");
}

int task_dim(Task task) { return task == Task::Dem3d ? 3 : 2; }

void LossConfig::validate() const {
  if (!(lambda_hr >= 0.0)) throw ConfigError("lambda_hr must be >= 0");
}

MeshTensors mesh_tensors(const SimplicialGrid& grid, torch::Dtype dtype) {
  const int d = grid.dim;
  const int ne = grid.num_elements();
  MeshTensors m;
  m.dim = d;
  std::vector<std::int64_t> idx(grid.elements.data(), grid.elements.data() + grid.elements.size());
  m.elements = torch::tensor(idx, torch::kInt64).view({ne, d + 1});
  std::vector<double> inv(static_cast<std::size_t>(ne) * d * d);
  for (int e = 0; e < ne; ++e) {
    Eigen::MatrixXd dx(d, d);
    for (int c = 0; c < d; ++c)
      for (int r = 0; r < d; ++r) dx(r, c) = grid.vertices(grid.elements(e, c + 1), r) - grid.vertices(grid.elements(e, 0), r);
    const Eigen::MatrixXd di = dx.inverse();
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) inv[(static_cast<std::size_t>(e) * d + r) * d + c] = di(r, c);
  }
  m.ref_inverse = torch::tensor(inv, torch::kFloat64).view({ne, d, d}).to(dtype);
  std::vector<double> meas(grid.ref_measures.data(), grid.ref_measures.data() + ne);
  m.ref_measures = torch::tensor(meas, torch::kFloat64).to(dtype);
  return m;
}

torch::Tensor to_tensor(const Points& p, torch::Dtype dtype) {
  return torch::from_blob(const_cast<double*>(p.data()), {p.rows(), p.cols()}, torch::kFloat64).to(dtype).clone();
}

Points to_points(const torch::Tensor& t) {
  const torch::Tensor c = t.detach().to(torch::kFloat64).contiguous();
  Points out(c.size(0), c.size(1));
  std::copy(c.data_ptr<double>(), c.data_ptr<double>() + c.numel(), out.data());
  return out;
}

torch::Tensor jacobians(const torch::Tensor& positions, const MeshTensors& mesh) {
  const int d = mesh.dim;
  if (positions.dim() != 2 || positions.size(1) != d) throw ConfigError("positions must be [V, dim]");
  const auto ne = mesh.elements.size(0);
  const torch::Tensor p = positions.index_select(0, mesh.elements.reshape({-1})).view({ne, d + 1, d});
  const torch::Tensor du = (p.index({Slice(), Slice(1)}) - p.index({Slice(), Slice(0, 1)})).transpose(1, 2);
  return torch::bmm(du, mesh.ref_inverse.to(positions.scalar_type()));
}

torch::Tensor determinants(const torch::Tensor& J) {
  auto at = [&](int r, int c) { return J.index({Slice(), r, c}); };
  if (J.size(1) == 2) return at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
  return at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) - at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
         at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
}

torch::Tensor mapped_measures(const torch::Tensor& positions, const MeshTensors& mesh) {
  return determinants(jacobians(positions, mesh)) * mesh.ref_measures.to(positions.scalar_type());
}

torch::Tensor beltrami(const torch::Tensor& J) {
  if (J.size(1) != 2) throw ConfigError("Beltrami coefficients are defined for planar maps only");
  const torch::Tensor a = J.index({Slice(), 0, 0}), b = J.index({Slice(), 0, 1});
  const torch::Tensor c = J.index({Slice(), 1, 0}), d = J.index({Slice(), 1, 1});
  const torch::Tensor fz_r = 0.5 * (a + d), fz_i = 0.5 * (c - b);
  const torch::Tensor fzb_r = 0.5 * (a - d), fzb_i = 0.5 * (c + b);
  const torch::Tensor den = (fz_r * fz_r + fz_i * fz_i).clamp_min(kFzFloor);
  const torch::Tensor re = (fzb_r * fz_r + fzb_i * fz_i) / den;
  const torch::Tensor im = (fzb_i * fz_r - fzb_r * fz_i) / den;
  return torch::stack({re, im}, 1);
}

torch::Tensor smooth_l1(const torch::Tensor& residual) {
  const torch::Tensor a = residual.abs();
  return torch::where(a < 1.0, 0.5 * residual * residual, a - 0.5).mean();
}

torch::Tensor loss_beltrami_recon(const torch::Tensor& positions, const MeshTensors& mesh, const torch::Tensor& mu_truth) {
  const torch::Tensor mu = beltrami(jacobians(positions, mesh));
  if (mu_truth.sizes() != mu.sizes()) throw ConfigError("mu_truth must be [E, 2]");
  return (mu - mu_truth.to(mu.scalar_type())).square().sum(1).mean();
}

namespace {

torch::Tensor density_residual(const torch::Tensor& measures, const torch::Tensor& populations) {
  if (populations.sizes() != measures.sizes()) throw ConfigError("populations must have one entry per element");
  const torch::Tensor p = populations.to(measures.scalar_type());
  // Below the floor p/A continues along its tangent, so folded elements carry a
  // large finite penalty that still pushes them to unfold.
  const torch::Tensor tangent = p / kMeasureFloor * (2.0 - measures / kMeasureFloor);
  const torch::Tensor rho = torch::where(measures >= kMeasureFloor, p / measures.clamp_min(kMeasureFloor), tangent);
  const torch::Tensor rho_bar = p.sum() / measures.sum().clamp_min(kMeasureFloor);
  return smooth_l1(rho - rho_bar);
}

}  // namespace

torch::Tensor loss_deq2d(const torch::Tensor& positions, const MeshTensors& mesh, const torch::Tensor& populations,
                         double lambda_hr) {
  if (mesh.dim != 2) throw ConfigError("deq2d loss needs a planar mesh");
  const torch::Tensor J = jacobians(positions, mesh);
  const torch::Tensor measures = determinants(J) * mesh.ref_measures.to(positions.scalar_type());
  torch::Tensor loss = density_residual(measures, populations);
  if (lambda_hr != 0.0) loss = loss + lambda_hr * beltrami(J).square().sum(1).mean();
  return loss;
}

torch::Tensor loss_dem3d(const torch::Tensor& positions, const MeshTensors& mesh, const torch::Tensor& populations) {
  if (mesh.dim != 3) throw ConfigError("dem3d loss needs a tetrahedral mesh");
  return density_residual(mapped_measures(positions, mesh), populations);
}

torch::Tensor task_loss(const LossConfig& cfg, const torch::Tensor& positions, const MeshTensors& mesh,
                        const torch::Tensor& target) {
  switch (cfg.task) {
    case Task::Bc2d: return loss_beltrami_recon(positions, mesh, target);
    case Task::Deq2d: return loss_deq2d(positions, mesh, target, cfg.lambda_hr);
    case Task::Dem3d: return loss_dem3d(positions, mesh, target);
  }
  throw ConfigError("unknown task");
}

double evaluate(const LossConfig& cfg, const MapField& map, const torch::Tensor& target) {
  torch::NoGradGuard no_grad;
  const MeshTensors mesh = mesh_tensors(*map.grid, torch::kFloat64);
  return task_loss(cfg, to_tensor(map.positions, torch::kFloat64), mesh, target.to(torch::kFloat64)).item<double>();
}

}  // namespace geomap::losses
