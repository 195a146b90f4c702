#include "geomap/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace geomap::training {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

double grad_norm(const std::vector<torch::Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.grad().defined()) sq += p.grad().to(torch::kFloat64).square().sum().item<double>();
  return std::sqrt(sq);
}

double clip_grad_norm(const std::vector<torch::Tensor>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (std::isfinite(norm) && norm > max_norm) {
    const double scale = max_norm / norm;
    torch::NoGradGuard no_grad;
    for (const auto& p : params)
      if (p.grad().defined()) p.grad().mul_(scale);
  }
  return norm;
}

torch::Tensor sample_displacement(const torch::Tensor& psi, const torch::Tensor& coords) {
  const auto d = psi.size(1);
  const auto nv = coords.size(0);
  if (coords.size(1) != d) throw ConfigError("coordinate and displacement dimensions differ");
  // grid_sample addresses the last spatial axis first.
  const torch::Tensor g = (2.0 * coords - 1.0).flip({1}).to(psi.scalar_type());
  const auto options = F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kBorder).align_corners(true);
  torch::Tensor out;
  if (d == 2) {
    out = F::grid_sample(psi, g.view({1, 1, nv, 2}), options);
  } else {
    out = F::grid_sample(psi, g.view({1, 1, 1, nv, 3}), options);
  }
  return out.reshape({d, nv}).t();
}

torch::Tensor loss_target(Task task, const ParamField& field, const SimplicialGrid& mesh) {
  if (!field.function) throw ConfigError("field has no closed form to evaluate on the loss mesh");
  const FieldFunction& f = *field.function;
  const int d = mesh.dim;
  std::vector<double> x(d), v(f.channels);
  if (task == Task::Bc2d) {
    if (f.channels != 2) throw ConfigError("bc2d needs a two-channel Beltrami field");
    std::vector<double> mu(static_cast<std::size_t>(mesh.num_elements()) * 2);
    for (int e = 0; e < mesh.num_elements(); ++e) {
      std::fill(x.begin(), x.end(), 0.0);
      for (int k = 0; k <= d; ++k)
        for (int a = 0; a < d; ++a) x[a] += mesh.vertices(mesh.elements(e, k), a) / (d + 1);
      f(x, v);
      mu[2 * e] = v[0];
      mu[2 * e + 1] = v[1];
    }
    return torch::tensor(mu, torch::kFloat64).view({mesh.num_elements(), 2});
  }
  std::vector<double> rho(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    for (int a = 0; a < d; ++a) x[a] = mesh.vertices(i, a);
    f(x, v);
    rho[i] = v[0];
  }
  return torch::tensor(element_populations(mesh, rho), torch::kFloat64);
}

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Sample draw_sample(const TrainConfig& config, int step) {
  const std::uint64_t key = splitmix(config.seed ^ splitmix(static_cast<std::uint64_t>(step)));
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  std::mt19937_64 rng(seq);
  Sample s;
  s.res = std::uniform_int_distribution<int>(config.res_lo, config.res_hi)(rng);
  const std::uint64_t field_seed = rng();
  const bool nonsmooth = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < config.nonsmooth_probability;
  const int dim = losses::task_dim(config.task);
  if (config.task == Task::Bc2d) {
    SynthSpec spec = SynthSpec::beltrami2d(field_seed);
    spec.real_mu = config.real_mu;
    if (nonsmooth) spec.nonsmooth = NonsmoothSpec{};
    s.field = synth_beltrami_2d(spec, s.res);
  } else {
    SynthSpec spec = dim == 2 ? SynthSpec::density2d(field_seed) : SynthSpec::density3d(field_seed);
    if (nonsmooth) spec.nonsmooth = NonsmoothSpec{};
    s.field = synth_density(spec, s.res, dim);
  }
  auto grid = std::make_shared<SimplicialGrid>(build_grid(s.res, dim));
  double scale = config.jitter_scale;
  for (int attempt = 0; scale > 0.0 && attempt < 6; ++attempt, scale *= 0.5) {
    try {
      const Points coords = sobol_jitter(s.res, s.field, scale, static_cast<std::uint64_t>(step));
      grid = std::make_shared<SimplicialGrid>(with_vertices(*grid, coords));
      s.jittered = true;
      break;
    } catch (const NumericalError&) {
      // an element inverted; retry with half the amplitude
    }
  }
  s.mesh = grid;
  s.target = loss_target(config.task, s.field, *s.mesh);
  return s;
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.network.seed = config_.seed;
  config_.validate();
  model_ = surrogate::MultiResUNet(config_.network);
  if (config_.float64) model_->to(torch::kFloat64);
  torch::optim::AdamWOptions options(config_.optimizer.lr);
  options.betas({config_.optimizer.beta1, config_.optimizer.beta2});
  options.weight_decay(config_.optimizer.weight_decay);
  options.eps(config_.optimizer.eps);
  optimizer_ = std::make_unique<torch::optim::AdamW>(model_->parameters(), options);
}

StepResult Trainer::step() {
  StepResult r;
  r.epoch = epoch_;
  r.lr = config_.schedule.lr(config_.optimizer.lr, epoch_);
  for (auto& group : optimizer_->param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(r.lr);

  const Sample s = draw_sample(config_, epoch_);
  r.res = s.res;
  const torch::Dtype dtype = config_.float64 ? torch::kFloat64 : torch::kFloat32;

  model_->train();
  optimizer_->zero_grad();
  const torch::Tensor psi = model_->forward(surrogate::to_torch(encode_input(s.field), dtype));
  const torch::Tensor coords = losses::to_tensor(s.mesh->vertices, dtype);
  const torch::Tensor rows = s.jittered ? sample_displacement(psi, coords) : surrogate::displacement_rows(psi);
  const torch::Tensor u = surrogate::apply_boundary(coords, rows, surrogate::BoundaryMask{config_.boundary});
  const losses::LossConfig lc{config_.task, config_.lambda_hr};
  const torch::Tensor loss = losses::task_loss(lc, u, losses::mesh_tensors(*s.mesh, dtype), s.target);
  r.loss = loss.item<double>();

  bool ok = std::isfinite(r.loss);
  if (ok) {
    loss.backward();
    r.grad_norm = clip_grad_norm(model_->parameters(), config_.grad_clip);
    ok = std::isfinite(r.grad_norm);
  }
  if (ok) {
    optimizer_->step();
    consecutive_bad_ = 0;
  } else {
    optimizer_->zero_grad();
    r.skipped = true;
    if (++consecutive_bad_ >= 3)
      throw NumericalError("training aborted: three consecutive non-finite steps ending at epoch " +
                           std::to_string(epoch_));
  }
  ++epoch_;
  history_.push_back(r);
  return r;
}

void Trainer::run(const std::string& out_dir, const std::function<void(const StepResult&)>& progress) {
  fs::create_directories(out_dir);
  const fs::path csv_path = fs::path(out_dir) / "loss.csv";
  const bool append = epoch_ > 0 && fs::exists(csv_path);
  std::ofstream csv(csv_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
  if (!append) csv << "epoch,loss,lr,res\n";
  csv.precision(10);
  while (epoch_ < config_.epochs) {
    const StepResult r = step();
    csv << r.epoch << ',' << r.loss << ',' << r.lr << ',' << r.res << '\n';
    if (progress) progress(r);
    if (config_.checkpoint_every > 0 && epoch_ % config_.checkpoint_every == 0 && epoch_ < config_.epochs) {
      csv.flush();
      save(out_dir);
    }
  }
  csv.flush();
  save(out_dir);
}

void Trainer::save(const std::string& dir) const {
  nlohmann::json manifest = {{"train", config_},
                             {"task", losses::to_string(config_.task)},
                             {"boundary", to_string(config_.boundary)},
                             {"seed", config_.seed},
                             {"epoch", epoch_},
                             {"consecutive_bad", consecutive_bad_},
                             {"loss_csv", "loss.csv"}};
  surrogate::MultiResUNet model = model_;
  surrogate::save_checkpoint(dir, model, manifest);
  torch::serialize::OutputArchive archive;
  optimizer_->save(archive);
  archive.save_to((fs::path(dir) / "optimizer.pt").string());
}

Trainer Trainer::resume(const std::string& dir) {
  surrogate::Checkpoint ck = surrogate::load_checkpoint(dir);
  if (!ck.manifest.contains("train")) throw ConfigError("checkpoint in " + dir + " has no training state");
  Trainer t(ck.manifest["train"].get<TrainConfig>());
  torch::serialize::InputArchive weights;
  weights.load_from((fs::path(dir) / "weights.pt").string());
  t.model_->load(weights);
  const fs::path opt_path = fs::path(dir) / "optimizer.pt";
  if (!fs::exists(opt_path)) throw ConfigError("checkpoint in " + dir + " has no optimizer state");
  torch::serialize::InputArchive opt;
  opt.load_from(opt_path.string());
  t.optimizer_->load(opt);
  t.epoch_ = ck.manifest.value("epoch", 0);
  t.consecutive_bad_ = ck.manifest.value("consecutive_bad", 0);
  return t;
}

}  // namespace geomap::training
