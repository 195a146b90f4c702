#pragma once

#include "geomap/fieldgen.hpp"
#include "geomap/losses.hpp"
#include "geomap/surrogate.hpp"

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace geomap::training {

using losses::Task;

enum class ScheduleKind { Step, CosineRestarts };

struct Schedule {
  ScheduleKind kind = ScheduleKind::Step;
  double factor = 0.5;  ///< step decay
  int period = 200;
  int t0 = 600;         ///< cosine restarts
  int t_mult = 2;
  double lr_min = 2e-6;

  /// Learning rate for 0-based epoch e.
  double lr(double lr0, int epoch) const;
};

struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-5;
  double eps = 1e-8;
};

struct TrainConfig {
  Task task = Task::Deq2d;
  int epochs = 2000;
  OptimizerConfig optimizer;
  Schedule schedule;
  int res_lo = 48;
  int res_hi = 64;
  double grad_clip = 1.0;
  double lambda_hr = 0.1;
  std::uint64_t seed = 0;
  bool desk_scale = false;
  BoundaryKind boundary = BoundaryKind::Square;
  double jitter_scale = kDefaultJitterScale;  ///< 0 disables jitter
  bool real_mu = false;
  double nonsmooth_probability = 0.5;         ///< share of steps whose field carries local non-smooth patches
  int checkpoint_every = 500;                 ///< 0 writes only the final checkpoint
  bool float64 = false;
  surrogate::SurrogateConfig network;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep the task preset's value.
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Published per-task configuration; desk_scale shortens epochs and resolutions only.
TrainConfig preset(Task task, bool desk_scale = false);

/// Scales gradients in place so their joint l2 norm is at most max_norm; returns the norm before clipping.
double clip_grad_norm(const std::vector<torch::Tensor>& params, double max_norm);
double grad_norm(const std::vector<torch::Tensor>& params);

/// Linear (bi/tri-linear) interpolation of a [1, d, n...] displacement at reference coordinates [V, d].
torch::Tensor sample_displacement(const torch::Tensor& psi, const torch::Tensor& coords);

/// One training instance: a random field, its jittered loss mesh and the loss target.
struct Sample {
  int res = 0;
  ParamField field;
  std::shared_ptr<const SimplicialGrid> mesh;  ///< loss-evaluation mesh (jittered vertices)
  bool jittered = false;
  torch::Tensor target;  ///< bc2d: mu [E, 2]; density: populations [E]
};

/// Deterministic in (config.seed, step).
Sample draw_sample(const TrainConfig& config, int step);

/// Loss target for a field on an arbitrary (possibly displaced) mesh, from the field's closed form.
torch::Tensor loss_target(Task task, const ParamField& field, const SimplicialGrid& mesh);

struct StepResult {
  int epoch = 0;
  int res = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;  ///< before clipping
  bool skipped = false;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  /// Runs the step for the current epoch and advances it.
  StepResult step();
  /// Runs until config.epochs; writes checkpoints and loss.csv into out_dir.
  void run(const std::string& out_dir, const std::function<void(const StepResult&)>& progress = {});

  /// Writes model, optimizer state and progress to `dir`.
  void save(const std::string& dir) const;
  /// Restores a run saved by save(); continues from its epoch.
  static Trainer resume(const std::string& dir);

  int epoch() const { return epoch_; }
  const TrainConfig& config() const { return config_; }
  surrogate::MultiResUNet& model() { return model_; }
  torch::optim::AdamW& optimizer() { return *optimizer_; }
  const std::vector<StepResult>& history() const { return history_; }

 private:
  TrainConfig config_;
  surrogate::MultiResUNet model_{nullptr};
  std::unique_ptr<torch::optim::AdamW> optimizer_;
  int epoch_ = 0;
  int consecutive_bad_ = 0;
  std::vector<StepResult> history_;
};

}  // namespace geomap::training
