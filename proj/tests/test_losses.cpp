#include "geomap/fieldgen.hpp"
#include "geomap/losses.hpp"
#include "geomap/surrogate.hpp"

#include "doctest_torch.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>

using namespace geomap;
using namespace geomap::losses;

namespace {

double huber(double r) { return std::abs(r) < 1.0 ? 0.5 * r * r : std::abs(r) - 0.5; }

// Reference loss by explicit loops over elements: edge matrices, determinants and complex mu.
double loop_loss(Task task, const SimplicialGrid& g, const Points& u, const std::vector<double>& target, double lambda) {
  const int d = g.dim;
  const int ne = g.num_elements();
  std::vector<double> area(ne);
  std::vector<std::complex<double>> mu(ne);
  for (int e = 0; e < ne; ++e) {
    Eigen::MatrixXd X(d, d), U(d, d);
    for (int k = 0; k < d; ++k)
      for (int a = 0; a < d; ++a) {
        X(a, k) = g.vertices(g.elements(e, k + 1), a) - g.vertices(g.elements(e, 0), a);
        U(a, k) = u(g.elements(e, k + 1), a) - u(g.elements(e, 0), a);
      }
    const Eigen::MatrixXd J = U * X.inverse();
    area[e] = J.determinant() * std::abs(X.determinant()) / (d == 2 ? 2.0 : 6.0);
    if (d == 2) {
      const std::complex<double> I(0, 1), fx(J(0, 0), J(1, 0)), fy(J(0, 1), J(1, 1));
      mu[e] = (fx + I * fy) / (fx - I * fy);
    }
  }
  if (task == Task::Bc2d) {
    double s = 0.0;
    for (int e = 0; e < ne; ++e) s += std::norm(mu[e] - std::complex<double>(target[2 * e], target[2 * e + 1]));
    return s / ne;
  }
  double P = 0.0, A = 0.0;
  for (int e = 0; e < ne; ++e) {
    P += target[e];
    A += area[e];
  }
  double s = 0.0, m2 = 0.0;
  for (int e = 0; e < ne; ++e) {
    s += huber(target[e] / area[e] - P / A);
    m2 += std::norm(mu[e]);
  }
  double loss = s / ne;
  if (task == Task::Deq2d) loss += lambda * m2 / ne;
  return loss;
}

Points perturbed(const SimplicialGrid& g, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  Points p = g.vertices;
  for (int v = 0; v < p.rows(); ++v)
    for (int a = 0; a < p.cols(); ++a) p(v, a) += u(rng) * g.spacing();
  return p;
}

std::vector<double> random_populations(const SimplicialGrid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::vector<double> p(g.num_elements());
  for (int e = 0; e < g.num_elements(); ++e) p[e] = u(rng) * g.ref_measures(e);
  return p;
}

torch::Tensor vec_tensor(const std::vector<double>& v) { return torch::tensor(v, torch::kFloat64); }

// Relative error ||a - b|| / ||b|| over two gradient vectors.
double relative_error(const std::vector<double>& fd, const std::vector<double>& ad) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num += (fd[i] - ad[i]) * (fd[i] - ad[i]);
    den += ad[i] * ad[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("smooth l1 values") {
  const torch::Tensor r = torch::tensor({0.5, -2.0, 0.0, 1.0}, torch::kFloat64);
  CHECK(smooth_l1(r).item<double>() == doctest::Approx((0.125 + 1.5 + 0.0 + 0.5) / 4.0));
}

TEST_CASE("identity map has zero density residual for a uniform field and zero mu") {
  const SimplicialGrid g = build_grid(9, 2);
  const MeshTensors mesh = mesh_tensors(g, torch::kFloat64);
  const torch::Tensor x = to_tensor(g.vertices, torch::kFloat64);
  const torch::Tensor pops = mesh.ref_measures.clone();
  CHECK(loss_deq2d(x, mesh, pops, 0.1).item<double>() == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(beltrami(jacobians(x, mesh)).abs().max().item<double>() < 1e-14);
  const SimplicialGrid g3 = build_grid(5, 3);
  const MeshTensors m3 = mesh_tensors(g3, torch::kFloat64);
  CHECK(loss_dem3d(to_tensor(g3.vertices, torch::kFloat64), m3, m3.ref_measures.clone()).item<double>() < 1e-28);
}

TEST_CASE("folded elements get a finite penalty with an unfolding gradient") {
  const SimplicialGrid g = build_grid(8, 2);
  const MeshTensors mesh = mesh_tensors(g, torch::kFloat64);
  Points u = g.vertices;
  u(4 * 8 + 4, 0) += 1.5 / 7.0;
  const torch::Tensor x = to_tensor(u, torch::kFloat64).requires_grad_(true);
  const torch::Tensor pops = mesh.ref_measures.clone();
  const torch::Tensor before = mapped_measures(x, mesh).detach();
  REQUIRE(before.min().item<double>() < 0.0);
  const torch::Tensor loss = loss_deq2d(x, mesh, pops, 0.0);
  CHECK(std::isfinite(loss.item<double>()));
  loss.backward();
  const torch::Tensor grad = x.grad();
  CHECK(torch::isfinite(grad).all().item<bool>());
  CHECK(grad.norm().item<double>() > 0.0);
  const torch::Tensor step = x.detach() - 1e-3 / 7.0 * grad / grad.norm();
  CHECK(mapped_measures(step, mesh).min().item<double>() > before.min().item<double>());
}

TEST_CASE("tensor losses agree with explicit element loops") {
  const SimplicialGrid g = build_grid(8, 2);
  const Points u = perturbed(g, 0.3, 1);
  const auto pops = random_populations(g, 2);
  std::vector<double> mu_t(2 * g.num_elements());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> m(-0.3, 0.3);
  for (double& v : mu_t) v = m(rng);
  const MeshTensors mesh = mesh_tensors(g, torch::kFloat64);
  const torch::Tensor x = to_tensor(u, torch::kFloat64);
  CHECK(loss_deq2d(x, mesh, vec_tensor(pops), 0.1).item<double>() ==
        doctest::Approx(loop_loss(Task::Deq2d, g, u, pops, 0.1)).epsilon(1e-12));
  CHECK(loss_beltrami_recon(x, mesh, vec_tensor(mu_t).view({-1, 2})).item<double>() ==
        doctest::Approx(loop_loss(Task::Bc2d, g, u, mu_t, 0.0)).epsilon(1e-12));

  const SimplicialGrid g3 = build_grid(6, 3);
  const Points u3 = perturbed(g3, 0.2, 4);
  const auto pops3 = random_populations(g3, 5);
  CHECK(loss_dem3d(to_tensor(u3, torch::kFloat64), mesh_tensors(g3, torch::kFloat64), vec_tensor(pops3)).item<double>() ==
        doctest::Approx(loop_loss(Task::Dem3d, g3, u3, pops3, 0.0)).epsilon(1e-12));
}

TEST_CASE("density loss is invariant under translation and mu under rotation in modulus") {
  const SimplicialGrid g = build_grid(8, 2);
  const Points u = perturbed(g, 0.3, 6);
  const auto pops = vec_tensor(random_populations(g, 7));
  const MeshTensors mesh = mesh_tensors(g, torch::kFloat64);
  const torch::Tensor x = to_tensor(u, torch::kFloat64);
  const torch::Tensor shift = torch::tensor({0.3, -1.7}, torch::kFloat64);
  CHECK(loss_deq2d(x + shift, mesh, pops, 0.1).item<double>() ==
        doctest::Approx(loss_deq2d(x, mesh, pops, 0.1).item<double>()).epsilon(1e-12));
  const double c = std::cos(0.7), s = std::sin(0.7);
  const torch::Tensor R = torch::tensor({c, -s, s, c}, torch::kFloat64).view({2, 2});
  const torch::Tensor mu0 = beltrami(jacobians(x, mesh)), mu1 = beltrami(jacobians(x.matmul(R.t()), mesh));
  CHECK(torch::allclose(mu0.square().sum(1), mu1.square().sum(1), 1e-12, 1e-14));
}

TEST_CASE("loss gradients with respect to positions match central differences") {
  auto check = [](Task task, const SimplicialGrid& g, const std::vector<double>& target) {
    const MeshTensors mesh = mesh_tensors(g, torch::kFloat64);
    const LossConfig cfg{task, 0.1};
    const torch::Tensor tgt = task == Task::Bc2d ? vec_tensor(target).view({-1, 2}) : vec_tensor(target);
    const Points u = perturbed(g, 0.25, 11);
    torch::Tensor x = to_tensor(u, torch::kFloat64).requires_grad_(true);
    task_loss(cfg, x, mesh, tgt).backward();
    const torch::Tensor grad = x.grad();
    std::vector<double> fd, ad;
    const double h = 1e-6;
    for (int v = 0; v < g.num_vertices(); ++v)
      for (int a = 0; a < g.dim; ++a) {
        torch::NoGradGuard ng;
        torch::Tensor xp = to_tensor(u, torch::kFloat64), xm = xp.clone();
        xp[v][a] += h;
        xm[v][a] -= h;
        fd.push_back((task_loss(cfg, xp, mesh, tgt).item<double>() - task_loss(cfg, xm, mesh, tgt).item<double>()) / (2 * h));
        ad.push_back(grad[v][a].item<double>());
      }
    const double err = relative_error(fd, ad);
    INFO(to_string(task) << " rel err " << err);
    CHECK(err < 1e-4);
  };
  const SimplicialGrid g = build_grid(8, 2);
  std::vector<double> mu_t(2 * g.num_elements(), 0.05);
  check(Task::Bc2d, g, mu_t);
  check(Task::Deq2d, g, random_populations(g, 12));
  const SimplicialGrid g3 = build_grid(6, 3);
  check(Task::Dem3d, g3, random_populations(g3, 13));
}

TEST_CASE("gradients through the boundary mask and a width-8 network match central differences") {
  // Network parameters drive psi; positions x + B(x) psi feed the loss.
  auto check = [](Task task, int res) {
    const int dim = task_dim(task);
    const SimplicialGrid g = build_grid(res, dim);
    const MeshTensors mesh = mesh_tensors(g, torch::kFloat64);
    surrogate::SurrogateConfig sc = surrogate::SurrogateConfig::defaults(dim, task == Task::Bc2d ? 2 : 1);
    sc.base_width = 8;
    sc.coarse_width = 4;
    sc.head_gain = 1.0;
    surrogate::MultiResUNet net(sc);
    net->to(torch::kFloat64);
    ParamField field = task == Task::Bc2d ? test_map_beltrami(TestMap::T1, res) : test_density(TestDensity::A, res, dim);
    const torch::Tensor input = surrogate::to_torch(encode_input(field), torch::kFloat64);
    const torch::Tensor coords = to_tensor(g.vertices, torch::kFloat64);
    torch::Tensor target;
    if (task == Task::Bc2d) {
      target = torch::full({g.num_elements(), 2}, 0.05, torch::kFloat64);
    } else {
      target = vec_tensor(element_populations(g, field.values));
    }
    const LossConfig cfg{task, 0.1};
    const surrogate::BoundaryMask mask{task == Task::Dem3d ? BoundaryKind::Free : BoundaryKind::Square};
    auto loss_fn = [&] {
      const torch::Tensor psi = surrogate::displacement_rows(net->forward(input));
      return task_loss(cfg, surrogate::apply_boundary(coords, psi, mask), mesh, target);
    };
    net->zero_grad();
    loss_fn().backward();
    std::vector<double> fd, ad;
    const double h = 1e-6;
    std::mt19937_64 rng(17);
    for (auto& p : net->parameters()) {
      const auto flat = p.view({-1});
      for (int trial = 0; trial < 2; ++trial) {
        const std::int64_t i = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(flat.numel()));
        double lp, lm;
        {
          torch::NoGradGuard ng;
          const double orig = flat[i].item<double>();
          flat[i] = orig + h;
          lp = loss_fn().item<double>();
          flat[i] = orig - h;
          lm = loss_fn().item<double>();
          flat[i] = orig;
        }
        fd.push_back((lp - lm) / (2 * h));
        ad.push_back(p.grad().view({-1})[i].item<double>());
      }
    }
    const double err = relative_error(fd, ad);
    INFO(to_string(task) << " rel err " << err);
    CHECK(err < 1e-4);
  };
  check(Task::Bc2d, 12);
  check(Task::Deq2d, 12);
  // the network's smallest admissible input is 8 per axis
  check(Task::Dem3d, 8);
}

TEST_CASE("gradient through the boundary mask on a 6^3 mesh") {
  const SimplicialGrid g = build_grid(6, 3);
  const MeshTensors mesh = mesh_tensors(g, torch::kFloat64);
  const torch::Tensor coords = to_tensor(g.vertices, torch::kFloat64);
  const torch::Tensor pops = vec_tensor(random_populations(g, 21));
  torch::manual_seed(4);
  const torch::Tensor psi0 = 0.1 * torch::randn({g.num_vertices(), 3}, torch::kFloat64);
  const surrogate::BoundaryMask mask{BoundaryKind::Square};
  torch::Tensor psi = psi0.clone().requires_grad_(true);
  loss_dem3d(surrogate::apply_boundary(coords, psi, mask), mesh, pops).backward();
  std::vector<double> fd, ad;
  for (int v = 0; v < g.num_vertices(); v += 3)
    for (int a = 0; a < 3; ++a) {
      torch::NoGradGuard ng;
      torch::Tensor pp = psi0.clone(), pm = psi0.clone();
      pp[v][a] += 1e-6;
      pm[v][a] -= 1e-6;
      fd.push_back((loss_dem3d(surrogate::apply_boundary(coords, pp, mask), mesh, pops).item<double>() -
                    loss_dem3d(surrogate::apply_boundary(coords, pm, mask), mesh, pops).item<double>()) / 2e-6);
      ad.push_back(psi.grad()[v][a].item<double>());
    }
  CHECK(relative_error(fd, ad) < 1e-4);
}

TEST_CASE("double-precision evaluation on a MapField") {
  auto g = std::make_shared<const SimplicialGrid>(build_grid(8, 2));
  MapField m = identity_map(g);
  m.positions = perturbed(*g, 0.2, 30);
  const auto pops = random_populations(*g, 31);
  CHECK(evaluate({Task::Deq2d, 0.1}, m, vec_tensor(pops)) ==
        doctest::Approx(loop_loss(Task::Deq2d, *g, m.positions, pops, 0.1)).epsilon(1e-12));
}

TEST_CASE("task names and configuration") {
  CHECK(task_from_string("bc2d") == Task::Bc2d);
  CHECK(task_from_string("dem3d") == Task::Dem3d);
  CHECK(task_dim(Task::Dem3d) == 3);
  CHECK_THROWS_AS(task_from_string("deq3d"), ConfigError);
  LossConfig c{Task::Deq2d, -1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const SimplicialGrid g = build_grid(6, 3);
  CHECK_THROWS_AS(beltrami(jacobians(to_tensor(g.vertices, torch::kFloat64), mesh_tensors(g, torch::kFloat64))), ConfigError);
}

}  // TEST_SUITE
