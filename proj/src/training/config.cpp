#include "geomap/training.hpp"

#include <cmath>
#include <numbers>

namespace geomap::training {

double Schedule::lr(double lr0, int epoch) const {
  if (kind == ScheduleKind::Step) return lr0 * std::pow(factor, epoch / period);
  // Warm restarts: cycle i lasts t0 * t_mult^i epochs.
  long long cycle = t0;
  long long t = epoch;
  while (t >= cycle) {
    t -= cycle;
    cycle *= t_mult;
  }
  const double frac = static_cast<double>(t) / static_cast<double>(cycle);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(optimizer.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(optimizer.weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (schedule.kind == ScheduleKind::Step && (schedule.period < 1 || !(schedule.factor > 0.0)))
    throw ConfigError("step schedule needs period >= 1 and factor > 0");
  if (schedule.kind == ScheduleKind::CosineRestarts && (schedule.t0 < 1 || schedule.t_mult < 1 || schedule.lr_min < 0.0))
    throw ConfigError("cosine schedule needs t0 >= 1, t_mult >= 1, lr_min >= 0");
  if (res_lo < surrogate::kMinSpatial || res_hi < res_lo || res_hi > 512)
    throw ConfigError("res_range must satisfy 8 <= lo <= hi <= 512");
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be > 0");
  if (!(lambda_hr >= 0.0)) throw ConfigError("lambda_hr must be >= 0");
  if (!(jitter_scale >= 0.0 && jitter_scale < 0.5)) throw ConfigError("jitter_scale must lie in [0, 0.5)");
  if (!(nonsmooth_probability >= 0.0 && nonsmooth_probability <= 1.0))
    throw ConfigError("nonsmooth_probability must lie in [0, 1]");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  network.validate();
  if (network.dim != losses::task_dim(task)) throw ConfigError("network dimension does not match the task");
  if (network.in_channels != network.dim + (task == Task::Bc2d ? 2 : 1))
    throw ConfigError("network input channels do not match the task");
}

TrainConfig preset(Task task, bool desk_scale) {
  TrainConfig c;
  c.task = task;
  c.desk_scale = desk_scale;
  switch (task) {
    case Task::Bc2d:
      c.epochs = 250000;
      c.res_lo = 64;
      c.res_hi = 96;
      // No published optimizer constants for this task; these are stand-ins.
      c.optimizer.lr = 1e-4;
      c.optimizer.weight_decay = 1e-5;
      c.schedule.kind = ScheduleKind::Step;
      c.schedule.factor = 0.5;
      c.schedule.period = 10000;
      c.lambda_hr = 0.0;
      c.nonsmooth_probability = 0.0;
      c.network = surrogate::SurrogateConfig::defaults(2, 2);
      if (desk_scale) {
        c.epochs = 20000;
        c.res_lo = 48;
        c.res_hi = 64;
      }
      break;
    case Task::Deq2d:
      c.epochs = 12000;
      c.res_lo = 64;
      c.res_hi = 96;
      c.optimizer.lr = 1e-5;
      c.optimizer.weight_decay = 1e-5;
      c.schedule.kind = ScheduleKind::Step;
      c.schedule.factor = 0.5;
      c.schedule.period = 200;
      c.lambda_hr = 0.1;
      c.network = surrogate::SurrogateConfig::defaults(2, 1);
      if (desk_scale) {
        c.epochs = 2000;
        c.res_lo = 48;
        c.res_hi = 64;
      }
      break;
    case Task::Dem3d:
      c.epochs = 4000;
      c.res_lo = 32;
      c.res_hi = 48;
      c.optimizer.lr = 2e-4;
      c.optimizer.beta1 = 0.9;
      c.optimizer.beta2 = 0.995;
      c.optimizer.weight_decay = 5e-5;
      c.schedule.kind = ScheduleKind::CosineRestarts;
      c.schedule.t0 = 600;
      c.schedule.t_mult = 2;
      c.schedule.lr_min = 2e-6;
      c.lambda_hr = 0.0;
      c.network = surrogate::SurrogateConfig::defaults(3, 1);
      if (desk_scale) {
        c.epochs = 800;
        c.res_lo = 24;
        c.res_hi = 32;
      }
      break;
  }
  c.grad_clip = 1.0;
  return c;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  nlohmann::json schedule;
  if (c.schedule.kind == ScheduleKind::Step) {
    schedule = {{"kind", "step"}, {"factor", c.schedule.factor}, {"period", c.schedule.period}};
  } else {
    schedule = {{"kind", "cosine_restarts"}, {"t0", c.schedule.t0}, {"t_mult", c.schedule.t_mult},
                {"lr_min", c.schedule.lr_min}};
  }
  j = {{"task", losses::to_string(c.task)},
       {"epochs", c.epochs},
       {"optimizer",
        {{"kind", "adamw"},
         {"lr", c.optimizer.lr},
         {"betas", {c.optimizer.beta1, c.optimizer.beta2}},
         {"weight_decay", c.optimizer.weight_decay},
         {"eps", c.optimizer.eps}}},
       {"schedule", schedule},
       {"res_range", {c.res_lo, c.res_hi}},
       {"grad_clip", c.grad_clip},
       {"lambda_hr", c.lambda_hr},
       {"seed", c.seed},
       {"desk_scale", c.desk_scale},
       {"boundary", to_string(c.boundary)},
       {"jitter_scale", c.jitter_scale},
       {"real_mu", c.real_mu},
       {"nonsmooth_probability", c.nonsmooth_probability},
       {"checkpoint_every", c.checkpoint_every},
       {"float64", c.float64},
       {"network", c.network}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  try {
    const Task task = losses::task_from_string(j.at("task").get<std::string>());
    c = preset(task, j.value("desk_scale", false));
    c.epochs = j.value("epochs", c.epochs);
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      if (o.value("kind", std::string("adamw")) != "adamw") throw ConfigError("only the adamw optimizer is supported");
      c.optimizer.lr = o.value("lr", c.optimizer.lr);
      if (o.contains("betas")) {
        c.optimizer.beta1 = o["betas"].at(0).get<double>();
        c.optimizer.beta2 = o["betas"].at(1).get<double>();
      }
      c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
      c.optimizer.eps = o.value("eps", c.optimizer.eps);
    }
    if (j.contains("schedule")) {
      const auto& s = j["schedule"];
      const std::string kind = s.value("kind", std::string("step"));
      if (kind == "step") {
        c.schedule.kind = ScheduleKind::Step;
      } else if (kind == "cosine_restarts") {
        c.schedule.kind = ScheduleKind::CosineRestarts;
      } else {
        throw ConfigError("unknown schedule kind '" + kind + "'");
      }
      c.schedule.factor = s.value("factor", c.schedule.factor);
      c.schedule.period = s.value("period", c.schedule.period);
      c.schedule.t0 = s.value("t0", c.schedule.t0);
      c.schedule.t_mult = s.value("t_mult", c.schedule.t_mult);
      c.schedule.lr_min = s.value("lr_min", c.schedule.lr_min);
    }
    if (j.contains("res_range")) {
      c.res_lo = j["res_range"].at(0).get<int>();
      c.res_hi = j["res_range"].at(1).get<int>();
    }
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.lambda_hr = j.value("lambda_hr", c.lambda_hr);
    c.seed = j.value("seed", c.seed);
    if (j.contains("boundary")) c.boundary = boundary_kind_from_string(j["boundary"].get<std::string>());
    c.jitter_scale = j.value("jitter_scale", c.jitter_scale);
    c.real_mu = j.value("real_mu", c.real_mu);
    c.nonsmooth_probability = j.value("nonsmooth_probability", c.nonsmooth_probability);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.float64 = j.value("float64", c.float64);
    if (j.contains("network")) c.network = j["network"].get<surrogate::SurrogateConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
}

}  // namespace geomap::training
