#include "geomap/surrogate.hpp"

#include <cmath>

namespace geomap::surrogate {

namespace F = torch::nn::functional;

namespace {

std::vector<std::int64_t> spatial_shape(const torch::Tensor& x) {
  return {x.sizes().begin() + 2, x.sizes().end()};
}

void default_init(torch::Tensor& weight, torch::Tensor& bias, std::int64_t fan_in) {
  torch::NoGradGuard no_grad;
  torch::nn::init::kaiming_uniform_(weight, std::sqrt(5.0));
  if (bias.defined()) {
    const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
    torch::nn::init::uniform_(bias, -bound, bound);
  }
}

int group_count(int channels) {
  for (int g : {8, 4, 2})
    if (channels % g == 0) return g;
  return 1;
}

}  // namespace

ConvNdImpl::ConvNdImpl(int dim, int in_channels, int out_channels, int kernel, int dilation, bool with_bias)
    : dim_(dim), padding_(dilation * (kernel - 1) / 2), dilation_(dilation) {
  std::vector<std::int64_t> shape{out_channels, in_channels};
  for (int a = 0; a < dim; ++a) shape.push_back(kernel);
  weight = register_parameter("weight", torch::empty(shape));
  if (with_bias) bias = register_parameter("bias", torch::empty({out_channels}));
  std::int64_t fan_in = in_channels;
  for (int a = 0; a < dim; ++a) fan_in *= kernel;
  default_init(weight, bias, fan_in);
}

torch::Tensor ConvNdImpl::forward(const torch::Tensor& x) {
  if (dim_ == 2) return torch::conv2d(x, weight, bias, 1, padding_, dilation_);
  return torch::conv3d(x, weight, bias, 1, padding_, dilation_);
}

ConvTransposeNdImpl::ConvTransposeNdImpl(int dim, int in_channels, int out_channels) : dim_(dim) {
  std::vector<std::int64_t> shape{in_channels, out_channels};
  for (int a = 0; a < dim; ++a) shape.push_back(2);
  weight = register_parameter("weight", torch::empty(shape));
  bias = register_parameter("bias", torch::empty({out_channels}));
  // torch computes fan_in of a transposed-conv weight from dim 1.
  std::int64_t fan_in = out_channels;
  for (int a = 0; a < dim; ++a) fan_in *= 2;
  default_init(weight, bias, fan_in);
}

torch::Tensor ConvTransposeNdImpl::forward(const torch::Tensor& x) {
  if (dim_ == 2) return torch::conv_transpose2d(x, weight, bias, 2);
  return torch::conv_transpose3d(x, weight, bias, 2);
}

torch::Tensor resize(const torch::Tensor& x, const std::vector<std::int64_t>& spatial, bool align_corners) {
  if (spatial_shape(x) == spatial) return x;
  auto options = F::InterpolateFuncOptions().size(spatial).align_corners(align_corners);
  if (spatial.size() == 2) {
    options.mode(torch::kBilinear);
  } else {
    options.mode(torch::kTrilinear);
  }
  return F::interpolate(x, options);
}

MultiResEncoderImpl::MultiResEncoderImpl(int dim, int in_channels, int full_width, int half_width, int quarter_width)
    : dim_(dim), total_(full_width + half_width + quarter_width) {
  proj_full_ = register_module("proj_full", ConvNd(dim, in_channels, full_width, 1));
  proj_half_ = register_module("proj_half", ConvNd(dim, in_channels, half_width, 1));
  proj_quarter_ = register_module("proj_quarter", ConvNd(dim, in_channels, quarter_width, 1));
  mix_ = register_module("mix", ConvNd(dim, total_, total_, 1));
}

MultiResEncoderImpl::Output MultiResEncoderImpl::forward(const torch::Tensor& x) {
  const auto full = spatial_shape(x);
  for (auto n : full)
    if (n < kMinSpatial) throw ConfigError("spatial size must be >= 8 per axis, got " + std::to_string(n));
  std::vector<std::int64_t> half, quarter;
  for (auto n : full) {
    half.push_back(n / 2);
    quarter.push_back(n / 4);
  }
  const torch::Tensor phi_full = proj_full_(x);
  const torch::Tensor phi_half = resize(proj_half_(resize(x, half)), full);
  const torch::Tensor phi_quarter = resize(proj_quarter_(resize(x, quarter)), full);
  Output out;
  out.phi = torch::cat({phi_full, phi_half, phi_quarter}, 1);
  out.psi = mix_(out.phi);
  return out;
}

EdgeAwareConvImpl::EdgeAwareConvImpl(int dim, int in_channels, int out_channels) {
  detector_ = register_module("detector", ConvNd(dim, in_channels, 1, 3));
  edge_ = register_module("edge", ConvNd(dim, in_channels, out_channels, 3, 2));
  local_ = register_module("local", ConvNd(dim, in_channels, out_channels, 3, 1));
  // Detector starts as the channel-averaged discrete Laplacian.
  torch::NoGradGuard no_grad;
  detector_->weight.zero_();
  detector_->bias.zero_();
  const double w = 1.0 / in_channels;
  for (int c = 0; c < in_channels; ++c) {
    auto k = detector_->weight[0][c];
    if (dim == 2) {
      k[1][1].fill_(-4.0 * w);
      k[0][1].fill_(w);
      k[2][1].fill_(w);
      k[1][0].fill_(w);
      k[1][2].fill_(w);
    } else {
      k[1][1][1].fill_(-6.0 * w);
      k[0][1][1].fill_(w);
      k[2][1][1].fill_(w);
      k[1][0][1].fill_(w);
      k[1][2][1].fill_(w);
      k[1][1][0].fill_(w);
      k[1][1][2].fill_(w);
    }
  }
}

EdgeAwareConvImpl::Branches EdgeAwareConvImpl::branches(const torch::Tensor& f) {
  Branches b;
  if (gate_override) {
    auto shape = f.sizes().vec();
    shape[1] = 1;
    b.gate = torch::full(shape, *gate_override, f.options());
  } else {
    b.gate = torch::sigmoid(detector_(f));
  }
  b.edge = edge_(f);
  b.local = local_(f);
  return b;
}

torch::Tensor EdgeAwareConvImpl::forward(const torch::Tensor& f) {
  const Branches b = branches(f);
  return b.gate * b.edge + (1.0 - b.gate) * b.local;
}

SpatialAttentionImpl::SpatialAttentionImpl(int dim) { conv_ = register_module("conv", ConvNd(dim, 2, 1, 7)); }

torch::Tensor SpatialAttentionImpl::forward(const torch::Tensor& x) {
  const torch::Tensor avg = x.mean(1, true);
  const torch::Tensor mx = std::get<0>(x.max(1, true));
  return x * torch::sigmoid(conv_(torch::cat({avg, mx}, 1)));
}

EnhancedDoubleConvImpl::EnhancedDoubleConvImpl(int dim, int in_channels, int out_channels, Activation activation,
                                               Norm norm)
    : activation_(activation) {
  conv1_ = register_module("conv1", EdgeAwareConv(dim, in_channels, out_channels));
  conv2_ = register_module("conv2", EdgeAwareConv(dim, out_channels, out_channels));
  if (norm == Norm::Group) {
    norm1_ = register_module("norm1", torch::nn::GroupNorm(group_count(out_channels), out_channels));
    norm2_ = register_module("norm2", torch::nn::GroupNorm(group_count(out_channels), out_channels));
  }
  attention_ = register_module("attention", SpatialAttention(dim));
}

torch::Tensor EnhancedDoubleConvImpl::activate(const torch::Tensor& x) const {
  switch (activation_) {
    case Activation::Gelu: return torch::gelu(x);
    case Activation::Silu: return torch::silu(x);
    case Activation::Tanh: return torch::tanh(x);
  }
  return x;
}

torch::Tensor EnhancedDoubleConvImpl::forward(const torch::Tensor& x) {
  torch::Tensor y = conv1_(x);
  if (norm1_) y = norm1_(y);
  y = activate(y);
  y = conv2_(y);
  if (norm2_) y = norm2_(y);
  y = activate(y);
  return attention_(y);
}

}  // namespace geomap::surrogate
