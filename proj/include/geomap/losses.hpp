#pragma once

#include "geomap/geometry.hpp"

#include <torch/torch.h>

#include <string>

namespace geomap::losses {

enum class Task { Bc2d, Deq2d, Dem3d };

std::string to_string(Task task);
Task task_from_string(const std::string& s);
int task_dim(Task task);

struct LossConfig {
  Task task = Task::Deq2d;
  double lambda_hr = 0.1;  ///< weight of the mean |mu|^2 term (deq2d only)

  void validate() const;
};

/// Lower bound applied to |f_z|^2 in the mu quotient.
inline constexpr double kFzFloor = 1e-8;
/// Lower bound applied to mapped element measures in density losses.
inline constexpr double kMeasureFloor = 1e-10;

/// Tensors describing a fixed reference mesh, in one dtype.
struct MeshTensors {
  int dim = 2;
  torch::Tensor elements;      ///< int64 [E, dim+1]
  torch::Tensor ref_inverse;   ///< [E, dim, dim], inverse of the reference edge matrix
  torch::Tensor ref_measures;  ///< [E]
};

MeshTensors mesh_tensors(const SimplicialGrid& grid, torch::Dtype dtype = torch::kFloat32);

torch::Tensor to_tensor(const Points& p, torch::Dtype dtype = torch::kFloat32);
Points to_points(const torch::Tensor& t);

/// Per-element Jacobians [E, d, d] of the piecewise-linear map with vertex positions [V, d].
torch::Tensor jacobians(const torch::Tensor& positions, const MeshTensors& mesh);
/// det J per element [E].
torch::Tensor determinants(const torch::Tensor& J);
/// Mapped signed element measures [E].
torch::Tensor mapped_measures(const torch::Tensor& positions, const MeshTensors& mesh);
/// Beltrami coefficient per element as [E, 2] (real, imaginary), with the |f_z|^2 floor.
torch::Tensor beltrami(const torch::Tensor& J);

/// mean over entries of 0.5 r^2 (|r| < 1) or |r| - 0.5.
torch::Tensor smooth_l1(const torch::Tensor& residual);

/// mean_e |mu(map)_e - mu_truth_e|^2; mu_truth is [E, 2].
torch::Tensor loss_beltrami_recon(const torch::Tensor& positions, const MeshTensors& mesh, const torch::Tensor& mu_truth);

/// smooth_l1(rho_e - rho_bar) + lambda_hr mean |mu_e|^2 with rho_e = p_e / A_e.
torch::Tensor loss_deq2d(const torch::Tensor& positions, const MeshTensors& mesh, const torch::Tensor& populations,
                         double lambda_hr);

/// smooth_l1(rho_e - rho_bar) over tetrahedra.
torch::Tensor loss_dem3d(const torch::Tensor& positions, const MeshTensors& mesh, const torch::Tensor& populations);

/// Dispatches on cfg.task. `target` is mu_truth [E, 2] for bc2d and populations [E] otherwise.
torch::Tensor task_loss(const LossConfig& cfg, const torch::Tensor& positions, const MeshTensors& mesh,
                        const torch::Tensor& target);

/// Double-precision evaluation on a MapField (no autograd).
double evaluate(const LossConfig& cfg, const MapField& map, const torch::Tensor& target);

}  // namespace geomap::losses
