#include "geomap/surrogate.hpp"

namespace geomap::surrogate {

namespace {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Gelu: return "gelu";
    case Activation::Silu: return "silu";
    case Activation::Tanh: return "tanh";
  }
  return "gelu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "silu") return Activation::Silu;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace

void SurrogateConfig::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("surrogate dim must be 2 or 3");
  if (in_channels <= dim) throw ConfigError("in_channels must be dim + m with m >= 1");
  if (depth < 2) throw ConfigError("depth must be >= 2");
  if (base_width < 8) throw ConfigError("base_width must be >= 8");
  if (coarse_width < 1) throw ConfigError("coarse_width must be >= 1");
  if (!(head_gain > 0.0)) throw ConfigError("head_gain must be positive");
}

SurrogateConfig SurrogateConfig::defaults(int dim, int parameter_channels) {
  SurrogateConfig c;
  c.dim = dim;
  c.in_channels = dim + parameter_channels;
  c.depth = dim == 2 ? 3 : 2;
  return c;
}

void to_json(nlohmann::json& j, const SurrogateConfig& c) {
  j = {{"dim", c.dim},
       {"in_channels", c.in_channels},
       {"base_width", c.base_width},
       {"depth", c.depth},
       {"coarse_width", c.coarse_width},
       {"activation", to_string(c.activation)},
       {"norm", c.norm == Norm::Group ? "group" : "none"},
       {"head_gain", c.head_gain},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SurrogateConfig& c) {
  c = SurrogateConfig{};
  c.dim = j.at("dim").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.base_width = j.value("base_width", c.base_width);
  c.depth = j.value("depth", c.dim == 2 ? 3 : 2);
  c.coarse_width = j.value("coarse_width", c.coarse_width);
  c.activation = activation_from_string(j.value("activation", std::string("gelu")));
  const std::string norm = j.value("norm", std::string("group"));
  if (norm == "group") {
    c.norm = Norm::Group;
  } else if (norm == "none") {
    c.norm = Norm::None;
  } else {
    throw ConfigError("unknown norm '" + norm + "'");
  }
  c.head_gain = j.value("head_gain", c.head_gain);
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
}

std::uint64_t config_hash(const SurrogateConfig& c) {
  const std::string text = nlohmann::json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

MultiResUNetImpl::MultiResUNetImpl(const SurrogateConfig& config) : config_(config) {
  config_.validate();
  torch::manual_seed(config_.seed);
  const int d = config_.dim;
  const int b = config_.base_width;
  encoder_ = register_module(
      "encoder", MultiResEncoder(d, config_.in_channels, b, config_.coarse_width, config_.coarse_width));
  int in = encoder_->total_width();
  for (int s = 0; s < config_.depth; ++s) {
    const int out = b << s;
    down_.push_back(register_module("down" + std::to_string(s),
                                    EnhancedDoubleConv(d, in, out, config_.activation, config_.norm)));
    in = out;
  }
  for (int s = config_.depth - 1; s >= 1; --s) {
    const int hi = b << s, lo = b << (s - 1);
    up_.push_back(register_module("up" + std::to_string(s), ConvTransposeNd(d, hi, lo)));
    up_blocks_.push_back(register_module("up_block" + std::to_string(s),
                                         EnhancedDoubleConv(d, 2 * lo, lo, config_.activation, config_.norm)));
  }
  head_ = register_module("head", ConvNd(d, b, d, 1));
  torch::NoGradGuard no_grad;
  head_->weight.mul_(config_.head_gain);
  head_->bias.zero_();
}

torch::Tensor MultiResUNetImpl::forward(const torch::Tensor& input) {
  const int d = config_.dim;
  if (input.dim() != d + 2) throw ConfigError("expected a [B, C, n...] tensor with " + std::to_string(d) + " spatial axes");
  if (input.size(1) != config_.in_channels)
    throw ConfigError("input has " + std::to_string(input.size(1)) + " channels, model expects " +
                      std::to_string(config_.in_channels));
  torch::Tensor x = encoder_(input).psi;
  std::vector<torch::Tensor> skips;
  for (int s = 0; s < config_.depth; ++s) {
    if (s > 0) x = d == 2 ? torch::avg_pool2d(x, 2) : torch::avg_pool3d(x, 2);
    x = down_[s](x);
    skips.push_back(x);
  }
  for (std::size_t k = 0; k < up_.size(); ++k) {
    const torch::Tensor& skip = skips[skips.size() - 2 - k];
    x = up_[k](x);
    x = resize(x, std::vector<std::int64_t>(skip.sizes().begin() + 2, skip.sizes().end()));
    x = up_blocks_[k](torch::cat({x, skip}, 1));
  }
  return head_(x);
}

}  // namespace geomap::surrogate
