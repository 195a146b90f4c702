#include "geomap/fieldgen.hpp"
#include "geomap/geometry.hpp"
#include "symbolic_maps.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>

using namespace geomap;

namespace {

std::shared_ptr<const SimplicialGrid> grid_ptr(int res, int dim) {
  return std::make_shared<const SimplicialGrid>(build_grid(res, dim));
}

// u = A x + c applied at every vertex.
MapField affine_map(std::shared_ptr<const SimplicialGrid> grid, const Eigen::MatrixXd& A, const Eigen::VectorXd& c) {
  MapField m = identity_map(grid);
  for (int v = 0; v < grid->num_vertices(); ++v) {
    const Eigen::VectorXd x = grid->vertices.row(v).transpose();
    m.positions.row(v) = (A * x + c).transpose();
  }
  return m;
}

// mu of the real-linear map with matrix [[a, b], [c, d]], from the complex form f = alpha z + beta conj(z).
std::complex<double> affine_mu(double a, double b, double c, double d) {
  const std::complex<double> alpha(0.5 * (a + d), 0.5 * (c - b));
  const std::complex<double> beta(0.5 * (a - d), 0.5 * (c + b));
  return beta / alpha;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("grid layout and orientation") {
  for (int dim : {2, 3}) {
    const SimplicialGrid g = build_grid(5, dim);
    CHECK(g.num_vertices() == (dim == 2 ? 25 : 125));
    CHECK(g.num_elements() == (dim == 2 ? 32 : 6 * 64));
    const Eigen::VectorXd m = element_measures(g.elements, g.vertices);
    CHECK(m.minCoeff() > 0.0);
    CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.ref_measures.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.vertex_weights().sum() == doctest::Approx(1.0).epsilon(1e-14));
    // vertex (i, j[, k]) sits at index (i N + j)[N + k] with x along axis 0
    const int v = dim == 2 ? (3 * 5 + 1) : ((3 * 5 + 1) * 5 + 2);
    CHECK(g.vertices(v, 0) == doctest::Approx(0.75));
    CHECK(g.vertices(v, 1) == doctest::Approx(0.25));
    if (dim == 3) CHECK(g.vertices(v, 2) == doctest::Approx(0.5));
    int boundary = 0;
    for (int i = 0; i < g.num_vertices(); ++i) {
      bool on = false;
      for (int a = 0; a < dim; ++a) on = on || g.vertices(i, a) == 0.0 || g.vertices(i, a) == 1.0;
      CHECK(on == g.on_boundary(i));
      boundary += on;
    }
    CHECK(static_cast<int>(g.boundary_vertices().size()) == boundary);
  }
  CHECK_THROWS_AS(build_grid(1, 2), ConfigError);
  CHECK_THROWS_AS(build_grid(4, 4), ConfigError);
}

TEST_CASE("identity map has zero mu and unit Jacobian") {
  const auto g = grid_ptr(9, 2);
  const MapField id = identity_map(g);
  const BeltramiField mu = beltrami_per_element(id);
  for (auto m : mu.mu) CHECK(std::abs(m) < 1e-14);
  for (double d : jacobian_det(id)) CHECK(d == doctest::Approx(1.0).epsilon(1e-14));
  for (double k : maximal_dilatation(mu).K) CHECK(k == doctest::Approx(1.0));
  CHECK(beltrami_energy(mu, *g) == 0.0);
}

TEST_CASE("affine maps have constant mu equal to beta over alpha") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n(0.0, 0.4);
  const auto g = grid_ptr(7, 2);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
    for (int i = 0; i < 4; ++i) A(i / 2, i % 2) += n(rng);
    if (A.determinant() <= 0.05) continue;
    Eigen::VectorXd c(2);
    c << n(rng), n(rng);
    const MapField m = affine_map(g, A, c);
    const std::complex<double> expected = affine_mu(A(0, 0), A(0, 1), A(1, 0), A(1, 1));
    const BeltramiField mu = beltrami_per_element(m);
    for (auto v : mu.mu) CHECK(std::abs(v - expected) < 1e-12);
    // constant mu: the energy is |mu|^2 times the domain area
    CHECK(beltrami_energy(mu, *g) == doctest::Approx(std::norm(expected)).epsilon(1e-12));
  }
}

TEST_CASE("maximal dilatation of |mu| = 0.5 is 3") {
  BeltramiField mu;
  mu.mu = {std::complex<double>(0.3, 0.4), std::polar(0.5, 2.0), 0.0, std::complex<double>(1.0, 0.0)};
  const Dilatation K = maximal_dilatation(mu);
  CHECK(K.K[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(K.K[1] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(K.K[2] == doctest::Approx(1.0));
  CHECK(std::isinf(K.K[3]));
  CHECK(K.infinite);
}

TEST_CASE("Jacobian determinant equals |f_z|^2 - |f_zbar|^2") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    const Wirtinger w = wirtinger(a, b, c, d);
    CHECK(a * d - b * c == doctest::Approx(std::norm(w.fz) - std::norm(w.fzbar)).epsilon(1e-12).scale(1.0));
    // independent complex-form check: f_z = (f_x - i f_y)/2 with f_x = a + i c, f_y = b + i d
    const std::complex<double> I(0.0, 1.0);
    const std::complex<double> fx(a, c), fy(b, d);
    CHECK(std::abs(w.fz - 0.5 * (fx - I * fy)) < 1e-14);
    CHECK(std::abs(w.fzbar - 0.5 * (fx + I * fy)) < 1e-14);
  }
}

TEST_CASE("per-element mu of the test maps converges to the symbolic coefficient") {
  for (int id = 1; id <= 4; ++id) {
    double previous = 0.0;
    for (int res : {32, 64, 128}) {
      const MapField m = test_map(static_cast<TestMap>(id - 1), res);
      const BeltramiField mu = beltrami_per_element(m);
      double err = 0.0;
      for (int e = 0; e < m.grid->num_elements(); ++e) {
        double cx = 0.0, cy = 0.0;
        for (int k = 0; k < 3; ++k) {
          cx += m.grid->vertices(m.grid->elements(e, k), 0) / 3.0;
          cy += m.grid->vertices(m.grid->elements(e, k), 1) / 3.0;
        }
        const auto truth = testing::symbolic_mu(testing::test_map_partials(id, cx, cy));
        err = std::max(err, std::abs(mu.mu[e] - truth));
      }
      INFO("T" << id << " N=" << res << " err=" << err);
      CHECK(err < 0.2);
      // first order in h: each refinement halves the max error
      if (previous > 0.0) {
        CHECK(previous / err >= 1.8);
        CHECK(previous / err <= 2.2);
      }
      previous = err;
    }
  }
}

TEST_CASE("composition rule agrees with affine composition") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.3);
  const auto g = grid_ptr(5, 2);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd F = Eigen::MatrixXd::Identity(2, 2), G = Eigen::MatrixXd::Identity(2, 2);
    for (int i = 0; i < 4; ++i) {
      F(i / 2, i % 2) += n(rng);
      G(i / 2, i % 2) += n(rng);
    }
    if (F.determinant() <= 0.1 || G.determinant() <= 0.1) continue;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    const MapField mf = affine_map(g, F, zero), mg = affine_map(g, G, zero);
    const BeltramiField composed = compose_beltrami(beltrami_per_element(mf), beltrami_per_element(mg), mg);
    const Eigen::MatrixXd H = F * G.inverse();
    const std::complex<double> expected = affine_mu(H(0, 0), H(0, 1), H(1, 0), H(1, 1));
    for (auto v : composed.mu) CHECK(std::abs(v - expected) < 1e-12);
  }
}

TEST_CASE("metric tensor of an affine map is A^T A") {
  Eigen::MatrixXd A(3, 3);
  A << 1.2, 0.1, 0.0, -0.2, 0.9, 0.3, 0.05, 0.0, 1.1;
  const auto g = grid_ptr(4, 3);
  const MapField m = affine_map(g, A, Eigen::VectorXd::Zero(3));
  const MetricField G = metric_tensor(m);
  const Eigen::MatrixXd expected = A.transpose() * A;
  for (int e = 0; e < g->num_elements(); ++e) {
    for (int i = 0; i < 9; ++i) CHECK(G.g[e * 9 + i] == doctest::Approx(expected(i / 3, i % 3)).epsilon(1e-12));
    CHECK(G.sqrt_det[e] == doctest::Approx(std::abs(A.determinant())).epsilon(1e-12));
  }
  for (double d : jacobian_det(m)) CHECK(d == doctest::Approx(A.determinant()).epsilon(1e-12));
}

TEST_CASE("element density of a uniform field under an area-preserving shear") {
  const auto g = grid_ptr(9, 2);
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 0.4, 0.0, 1.0;
  const MapField m = affine_map(g, A, Eigen::VectorXd::Zero(2));
  const std::vector<double> p = element_populations(*g, std::vector<double>(g->num_vertices(), 1.0));
  const DensityStats s = element_density(m, p);
  CHECK(s.std_rho_tilde < 1e-12);
  CHECK(s.fold_count == 0);
}

TEST_CASE("folded elements are counted") {
  const auto g = grid_ptr(5, 2);
  MapField m = identity_map(g);
  m.positions.row(12) << 0.9, 0.9;  // centre vertex pushed past its neighbours
  const std::vector<double> p = element_populations(*g, std::vector<double>(g->num_vertices(), 1.0));
  CHECK(element_density(m, p).fold_count > 0);
  double mn = 1.0;
  for (double d : jacobian_det(m)) mn = std::min(mn, d);
  CHECK(mn < 0.0);
}

TEST_CASE("population standard deviation") {
  CHECK(standard_deviation({1.0, 3.0}) == doctest::Approx(1.0));
  CHECK(standard_deviation({2.0, 2.0, 2.0}) == 0.0);
  CHECK(standard_deviation({}) == 0.0);
}

}  // TEST_SUITE
