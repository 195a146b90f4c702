#pragma once

#include "geomap/common.hpp"
#include "geomap/geometry.hpp"

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include <optional>
#include <string>

namespace geomap::surrogate {

enum class Activation { Gelu, Silu, Tanh };
enum class Norm { Group, None };

struct SurrogateConfig {
  int dim = 2;
  int in_channels = 3;      ///< dim + m
  int base_width = 32;
  int depth = 3;            ///< encoder stages (the last one is the bottleneck)
  int coarse_width = 16;    ///< projection width of the 1/2 and 1/4 input branches
  Activation activation = Activation::Gelu;
  Norm norm = Norm::Group;
  double head_gain = 0.01;  ///< scale of the output head initialization
  std::uint64_t seed = 0;

  void validate() const;
  static SurrogateConfig defaults(int dim, int parameter_channels);
};

void to_json(nlohmann::json& j, const SurrogateConfig& c);
void from_json(const nlohmann::json& j, SurrogateConfig& c);

/// Stable 64-bit FNV-1a hash of the canonical JSON dump of a config.
std::uint64_t config_hash(const SurrogateConfig& c);

/// Convolution that dispatches to the 2D or 3D kernel. Weights use the same
/// kaiming-uniform initialization as torch::nn::Conv*d.
class ConvNdImpl : public torch::nn::Module {
 public:
  ConvNdImpl(int dim, int in_channels, int out_channels, int kernel, int dilation = 1, bool bias = true);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  int dim_;
  int padding_;
  int dilation_;
};
TORCH_MODULE(ConvNd);

/// Stride-2, kernel-2 transposed convolution.
class ConvTransposeNdImpl : public torch::nn::Module {
 public:
  ConvTransposeNdImpl(int dim, int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  int dim_;
};
TORCH_MODULE(ConvTransposeNd);

/// Linear (bi/tri-linear) resize with corners aligned.
torch::Tensor resize(const torch::Tensor& x, const std::vector<std::int64_t>& spatial, bool align_corners = true);

/// Input lifting at full, half and quarter resolution followed by pointwise fusion.
class MultiResEncoderImpl : public torch::nn::Module {
 public:
  MultiResEncoderImpl(int dim, int in_channels, int full_width, int half_width, int quarter_width);

  struct Output {
    torch::Tensor phi;  ///< concatenated branches, C_tot channels
    torch::Tensor psi;  ///< fused embedding, C_tot channels
  };
  Output forward(const torch::Tensor& x);
  int total_width() const { return total_; }

 private:
  int dim_;
  int total_;
  ConvNd proj_full_{nullptr}, proj_half_{nullptr}, proj_quarter_{nullptr}, mix_{nullptr};
};
TORCH_MODULE(MultiResEncoder);

/// w = sigmoid(E(f)); out = w * C_edge(f) + (1 - w) * C_loc(f).
class EdgeAwareConvImpl : public torch::nn::Module {
 public:
  EdgeAwareConvImpl(int dim, int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& f);

  struct Branches {
    torch::Tensor gate, edge, local;
  };
  Branches branches(const torch::Tensor& f);

  /// Test hook: forces the gate to a constant in [0, 1].
  std::optional<double> gate_override;

 private:
  ConvNd detector_{nullptr}, edge_{nullptr}, local_{nullptr};
};
TORCH_MODULE(EdgeAwareConv);

/// Per-location sigmoid gate from channel-mean and channel-max maps.
class SpatialAttentionImpl : public torch::nn::Module {
 public:
  explicit SpatialAttentionImpl(int dim);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvNd conv_{nullptr};
};
TORCH_MODULE(SpatialAttention);

/// [edge-aware conv -> norm -> activation] x 2 -> spatial attention.
class EnhancedDoubleConvImpl : public torch::nn::Module {
 public:
  EnhancedDoubleConvImpl(int dim, int in_channels, int out_channels, Activation activation, Norm norm);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::Tensor activate(const torch::Tensor& x) const;
  Activation activation_;
  EdgeAwareConv conv1_{nullptr}, conv2_{nullptr};
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
  SpatialAttention attention_{nullptr};
};
TORCH_MODULE(EnhancedDoubleConv);

/// Resolution-free multi-resolution enhanced U-Net. Input [B, dim+m, n...],
/// output displacement [B, dim, n...] with exactly the input spatial shape.
class MultiResUNetImpl : public torch::nn::Module {
 public:
  explicit MultiResUNetImpl(const SurrogateConfig& config);
  torch::Tensor forward(const torch::Tensor& input);
  const SurrogateConfig& config() const { return config_; }

 private:
  SurrogateConfig config_;
  MultiResEncoder encoder_{nullptr};
  std::vector<EnhancedDoubleConv> down_;
  std::vector<ConvTransposeNd> up_;
  std::vector<EnhancedDoubleConv> up_blocks_;
  ConvNd head_{nullptr};
};
TORCH_MODULE(MultiResUNet);

/// Minimum spatial extent accepted per axis.
inline constexpr int kMinSpatial = 8;

/// Converts a GridTensor to a [1, C, n...] torch tensor of the given dtype.
torch::Tensor to_torch(const GridTensor& t, torch::Dtype dtype = torch::kFloat32);

/// ψ tensor [1, dim, n...] -> [#V, dim] per-vertex rows in grid vertex order.
torch::Tensor displacement_rows(const torch::Tensor& psi);

struct BoundaryMask {
  BoundaryKind kind = BoundaryKind::Square;
  double alpha_mask = 4.0;

  /// Scalar mask per vertex: prod_j alpha x_j (1 - x_j) for square, 1 for free.
  torch::Tensor values(const torch::Tensor& coords) const;
  double value(const double* x, int dim) const;
};

/// u = x + B(x) ⊙ ψ (differentiable). coords and psi are [#V, dim].
torch::Tensor apply_boundary(const torch::Tensor& coords, const torch::Tensor& psi, const BoundaryMask& mask);

/// Inference-side version producing a MapField; ψ rows are per vertex.
MapField apply_boundary(std::shared_ptr<const SimplicialGrid> grid, const Points& psi, const BoundaryMask& mask,
                        const std::vector<double>& alpha = {});

/// Runs the network on an encoded field (no autograd) and returns ψ as [#V, dim] rows.
Points predict_displacement(MultiResUNet& model, const GridTensor& input);

struct Checkpoint {
  SurrogateConfig config;
  nlohmann::json manifest;
  MultiResUNet model{nullptr};
};

/// Writes config.json (config, hash, manifest) and weights.pt into `dir`.
void save_checkpoint(const std::string& dir, MultiResUNet& model, const nlohmann::json& manifest);
/// Loads and validates the stored config hash against the weights archive.
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace geomap::surrogate
