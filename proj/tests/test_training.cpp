#include "geomap/training.hpp"

#include "doctest_torch.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace geomap;
using namespace geomap::training;

namespace {

TrainConfig tiny(Task task, std::uint64_t seed = 0) {
  TrainConfig c = preset(task, true);
  c.seed = seed;
  c.res_lo = task == Task::Dem3d ? 8 : 12;
  c.res_hi = task == Task::Dem3d ? 10 : 16;
  c.network.base_width = 8;
  c.network.coarse_width = 4;
  c.checkpoint_every = 0;
  return c;
}

std::vector<torch::Tensor> snapshot(surrogate::MultiResUNet& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m->parameters()) out.push_back(p.detach().clone());
  return out;
}

bool same(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!torch::equal(a[i], b[i])) return false;
  return true;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("published task presets") {
  const TrainConfig deq = preset(Task::Deq2d);
  CHECK(deq.epochs == 12000);
  CHECK(deq.optimizer.lr == 1e-5);
  CHECK(deq.optimizer.weight_decay == 1e-5);
  CHECK(deq.schedule.kind == ScheduleKind::Step);
  CHECK(deq.schedule.factor == 0.5);
  CHECK(deq.schedule.period == 200);
  CHECK(deq.lambda_hr == 0.1);
  CHECK(deq.grad_clip == 1.0);

  const TrainConfig dem = preset(Task::Dem3d);
  CHECK(dem.epochs == 4000);
  CHECK(dem.optimizer.lr == 2e-4);
  CHECK(dem.optimizer.beta1 == 0.9);
  CHECK(dem.optimizer.beta2 == 0.995);
  CHECK(dem.optimizer.weight_decay == 5e-5);
  CHECK(dem.schedule.kind == ScheduleKind::CosineRestarts);
  CHECK(dem.schedule.t0 == 600);
  CHECK(dem.schedule.t_mult == 2);
  CHECK(dem.schedule.lr_min == 2e-6);

  CHECK(preset(Task::Bc2d).epochs == 250000);
  CHECK(preset(Task::Bc2d, true).epochs == 20000);
  CHECK(preset(Task::Deq2d, true).epochs == 2000);
  CHECK(preset(Task::Deq2d, true).res_lo == 48);
  CHECK(preset(Task::Deq2d, true).res_hi == 64);
  // desk scale changes only epochs and resolutions
  CHECK(preset(Task::Dem3d, true).optimizer.lr == dem.optimizer.lr);
}

TEST_CASE("step and cosine-restart schedules") {
  Schedule s;
  s.kind = ScheduleKind::Step;
  s.factor = 0.5;
  s.period = 200;
  CHECK(s.lr(1e-5, 0) == 1e-5);
  CHECK(s.lr(1e-5, 199) == 1e-5);
  CHECK(s.lr(1e-5, 200) == doctest::Approx(5e-6));
  CHECK(s.lr(1e-5, 650) == doctest::Approx(1.25e-6));

  Schedule c;
  c.kind = ScheduleKind::CosineRestarts;
  c.t0 = 600;
  c.t_mult = 2;
  c.lr_min = 2e-6;
  const double lr0 = 2e-4, mid = 2e-6 + 0.5 * (lr0 - 2e-6);
  CHECK(c.lr(lr0, 0) == doctest::Approx(lr0));
  CHECK(c.lr(lr0, 300) == doctest::Approx(mid));
  CHECK(c.lr(lr0, 600) == doctest::Approx(lr0));  // restart
  CHECK(c.lr(lr0, 1200) == doctest::Approx(mid)); // second cycle is 1200 long
  CHECK(c.lr(lr0, 1800) == doctest::Approx(lr0));
  CHECK(c.lr(lr0, 599) > 2e-6);
}

TEST_CASE("gradient clipping scales to the requested joint norm") {
  torch::Tensor a = torch::zeros({1}, torch::requires_grad()), b = torch::zeros({1}, torch::requires_grad());
  (3.0 * a + 4.0 * b).sum().backward();
  const double n = clip_grad_norm({a, b}, 1.0);
  CHECK(n == doctest::Approx(5.0));
  CHECK(a.grad().item<double>() == doctest::Approx(0.6));
  CHECK(b.grad().item<double>() == doctest::Approx(0.8));
  CHECK(clip_grad_norm({a, b}, 10.0) == doctest::Approx(1.0));
  CHECK(a.grad().item<double>() == doctest::Approx(0.6));
}

TEST_CASE("displacement sampling interpolates linearly and hits vertices exactly") {
  for (int dim : {2, 3}) {
    const int n = 9;
    const SimplicialGrid g = build_grid(n, dim);
    // psi_c = a_c . x + b_c, a linear field
    const torch::Tensor x = losses::to_tensor(g.vertices, torch::kFloat64);
    const torch::Tensor A = torch::arange(dim * dim, torch::kFloat64).view({dim, dim}) * 0.1 - 0.2;
    const torch::Tensor rows = x.matmul(A) + 0.05;
    std::vector<std::int64_t> shape = {1, dim};
    for (int a = 0; a < dim; ++a) shape.push_back(n);
    const torch::Tensor psi = rows.t().reshape(shape).contiguous();
    CHECK(torch::allclose(surrogate::displacement_rows(psi), rows, 0.0, 1e-15));
    CHECK(torch::allclose(sample_displacement(psi, x), rows, 0.0, 1e-12));
    const torch::Tensor off = torch::rand({50, dim}, torch::kFloat64);
    CHECK(torch::allclose(sample_displacement(psi, off), off.matmul(A) + 0.05, 0.0, 1e-12));
  }
}

TEST_CASE("samples are deterministic, in range and positively oriented") {
  const TrainConfig c = tiny(Task::Deq2d, 3);
  for (int step = 0; step < 6; ++step) {
    const Sample a = draw_sample(c, step), b = draw_sample(c, step);
    CHECK(a.res == b.res);
    CHECK(a.field.values == b.field.values);
    CHECK(torch::equal(a.target, b.target));
    CHECK(a.res >= c.res_lo);
    CHECK(a.res <= c.res_hi);
    CHECK(a.jittered);
    CHECK(element_measures(a.mesh->elements, a.mesh->vertices).minCoeff() > 0.0);
    // populations sum to the lumped mass of the field over the jittered mesh, close to 1
    CHECK(a.target.sum().item<double>() == doctest::Approx(1.0).epsilon(0.05));
  }
  CHECK(draw_sample(c, 0).field.values != draw_sample(c, 1).field.values);
}

TEST_CASE("loss target on the regular grid equals element populations of the samples") {
  const ParamField f = test_density(TestDensity::A, 16, 2);
  const SimplicialGrid g = build_grid(16, 2);
  const torch::Tensor t = loss_target(Task::Deq2d, f, g);
  const auto p = element_populations(g, f.values);
  for (int e = 0; e < g.num_elements(); e += 7) CHECK(t[e].item<double>() == doctest::Approx(p[e]).epsilon(1e-14));
}

TEST_CASE("zero learning rate leaves the weights untouched") {
  TrainConfig c = tiny(Task::Deq2d);
  c.optimizer.lr = 0.0;
  Trainer t(c);
  const auto before = snapshot(t.model());
  t.step();
  t.step();
  CHECK(same(before, snapshot(t.model())));
}

TEST_CASE("training steps update weights and report finite losses") {
  for (Task task : {Task::Bc2d, Task::Deq2d, Task::Dem3d}) {
    Trainer t(tiny(task));
    const auto before = snapshot(t.model());
    const StepResult r = t.step();
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss > 0.0);
    CHECK(!r.skipped);
    CHECK(!same(before, snapshot(t.model())));
    CHECK(t.epoch() == 1);
  }
}

TEST_CASE("resuming a saved run continues bit-identically") {
  const auto dir = std::filesystem::temp_directory_path() / "geomap_test_resume";
  std::filesystem::remove_all(dir);
  TrainConfig c = tiny(Task::Deq2d, 9);
  c.epochs = 4;
  c.optimizer.lr = 1e-3;
  Trainer straight(c);
  for (int i = 0; i < 4; ++i) straight.step();

  Trainer first(c);
  first.step();
  first.step();
  first.save(dir.string());
  Trainer resumed = Trainer::resume(dir.string());
  CHECK(resumed.epoch() == 2);
  resumed.step();
  resumed.step();
  CHECK(same(snapshot(straight.model()), snapshot(resumed.model())));
  std::filesystem::remove_all(dir);
}

TEST_CASE("run writes a checkpoint and a loss log") {
  const auto dir = std::filesystem::temp_directory_path() / "geomap_test_run";
  std::filesystem::remove_all(dir);
  TrainConfig c = tiny(Task::Deq2d, 1);
  c.epochs = 3;
  c.checkpoint_every = 2;
  Trainer t(c);
  int calls = 0;
  t.run(dir.string(), [&](const StepResult&) { ++calls; });
  CHECK(calls == 3);
  for (const char* f : {"config.json", "weights.pt", "optimizer.pt", "loss.csv"}) CHECK(std::filesystem::exists(dir / f));
  const surrogate::Checkpoint ck = surrogate::load_checkpoint(dir.string());
  CHECK(ck.manifest["epoch"] == 3);
  CHECK(ck.manifest["task"] == "deq2d");
  std::filesystem::remove_all(dir);
}

TEST_CASE("three consecutive non-finite steps abort with NumericalError") {
  TrainConfig c = tiny(Task::Deq2d);
  c.optimizer.lr = 1e30;
  c.optimizer.weight_decay = 0.0;
  Trainer t(c);
  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 10; ++i) t.step();
      }(),
      NumericalError);
  int skipped = 0;
  for (const auto& r : t.history()) skipped += r.skipped;
  CHECK(skipped >= 2);
}

TEST_CASE("config JSON round trip and validation") {
  TrainConfig c = preset(Task::Dem3d, true);
  c.seed = 42;
  c.boundary = BoundaryKind::Free;
  const TrainConfig back = nlohmann::json(c).get<TrainConfig>();
  CHECK(nlohmann::json(back) == nlohmann::json(c));
  // missing keys fall back to the preset
  const TrainConfig partial = nlohmann::json{{"task", "deq2d"}, {"epochs", 10}}.get<TrainConfig>();
  CHECK(partial.epochs == 10);
  CHECK(partial.optimizer.lr == 1e-5);
  CHECK_THROWS_AS((nlohmann::json{{"task", "deq2d"}, {"res_range", {4, 8}}}.get<TrainConfig>()), ConfigError);
  CHECK_THROWS_AS((nlohmann::json{{"task", "deq2d"}, {"schedule", {{"kind", "linear"}}}}.get<TrainConfig>()), ConfigError);
  CHECK_THROWS_AS((nlohmann::json{{"epochs", 3}}.get<TrainConfig>()), ConfigError);
  CHECK_THROWS_AS((nlohmann::json{{"task", "deq2d"}, {"grad_clip", 0.0}}.get<TrainConfig>()), ConfigError);
}

}  // TEST_SUITE
