#include "geomap/evalcli.hpp"
#include "geomap/training.hpp"

#include "doctest_torch.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

using namespace geomap;
using namespace geomap::evalcli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("geomap_evalcli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "geomap");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Untrained deq2d checkpoint with a small network.
std::string tiny_checkpoint(const fs::path& dir) {
  training::TrainConfig c = training::preset(losses::Task::Deq2d, true);
  c.network.base_width = 8;
  c.network.coarse_width = 4;
  c.epochs = 0;
  training::Trainer t(c);
  t.save(dir.string());
  return dir.string();
}

}  // namespace

TEST_SUITE("evalcli") {

TEST_CASE("field files round-trip bit-exactly and keep the closed form") {
  const auto dir = scratch("field");
  for (const ParamField& f : {synth_density(SynthSpec::density2d(3), 20, 2), synth_density(SynthSpec::density3d(4), 10, 3),
                              synth_beltrami_2d(SynthSpec::beltrami2d(5), 16), test_density(TestDensity::C, 12, 2)}) {
    const auto path = (dir / "f.gfd").string();
    write_field(path, f);
    const ParamField g = read_field(path);
    CHECK(g.values == f.values);
    CHECK(g.res == f.res);
    CHECK(g.kind == f.kind);
    CHECK(g.spec == f.spec);
    CHECK(g.function != nullptr);
  }
  // truncation and trailing bytes are rejected
  const auto path = (dir / "t.gfd").string();
  write_field(path, test_density(TestDensity::A, 10, 2));
  const std::string bytes = slurp(path);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(read_field(path), ConfigError);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes << "x";
  CHECK_THROWS_AS(read_field(path), ConfigError);
  CHECK_THROWS_AS(read_field((dir / "missing.gfd").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("map files round-trip bit-exactly") {
  const auto dir = scratch("map");
  MapField m = test_map(TestMap::T4, 17);
  m.alpha = {0.9, 1.1};
  m.provenance = Provenance::Surrogate;
  write_map((dir / "m.gmp").string(), m);
  const MapField back = read_map((dir / "m.gmp").string());
  CHECK(back.positions == m.positions);
  CHECK(back.alpha == m.alpha);
  CHECK(back.provenance == Provenance::Surrogate);
  CHECK(back.boundary_kind == BoundaryKind::Square);
  fs::remove_all(dir);
}

TEST_CASE("evaluation metrics agree with a direct computation") {
  const ParamField f = test_density(TestDensity::B, 20, 2);
  auto g = std::make_shared<const SimplicialGrid>(build_grid(20, 2));
  MapField m = test_map(TestMap::T2, 20);
  const MapField truth = test_map(TestMap::T1, 20);
  const EvalReport r = eval_map(m, f, &truth);

  // direct: triangle areas by the shoelace formula, mu by complex differences
  const int ne = g->num_elements();
  std::vector<double> rho(ne), rho0(ne);
  double min_area_ratio = 1e300, mu_max = 0.0, mu_sum = 0.0, dmu = 0.0;
  auto tri = [&](const Points& p, int e, int k) { return p.row(g->elements(e, k)); };
  auto mu_of = [&](const Points& p, int e) {
    const Eigen::RowVectorXd a = tri(p, e, 0), b = tri(p, e, 1), c = tri(p, e, 2);
    const Eigen::RowVectorXd A = tri(g->vertices, e, 0), B = tri(g->vertices, e, 1), C = tri(g->vertices, e, 2);
    // complex affine map f(z) = alpha z + beta conj(z) through the edge vectors
    const std::complex<double> z1(B(0) - A(0), B(1) - A(1)), z2(C(0) - A(0), C(1) - A(1));
    const std::complex<double> w1(b(0) - a(0), b(1) - a(1)), w2(c(0) - a(0), c(1) - a(1));
    const std::complex<double> det = z1 * std::conj(z2) - z2 * std::conj(z1);
    const std::complex<double> alpha = (w1 * std::conj(z2) - w2 * std::conj(z1)) / det;
    const std::complex<double> beta = (z1 * w2 - z2 * w1) / det;
    return beta / alpha;
  };
  auto area = [&](const Points& p, int e) {
    const Eigen::RowVectorXd a = tri(p, e, 0), b = tri(p, e, 1), c = tri(p, e, 2);
    return 0.5 * ((b(0) - a(0)) * (c(1) - a(1)) - (c(0) - a(0)) * (b(1) - a(1)));
  };
  for (int e = 0; e < ne; ++e) {
    double pe = 0.0;
    for (int k = 0; k < 3; ++k) pe += f.values[g->elements(e, k)] / 3.0;
    const double a0 = area(g->vertices, e);
    rho0[e] = pe;  // population / reference area
    rho[e] = pe * a0 / area(m.positions, e);
    min_area_ratio = std::min(min_area_ratio, area(m.positions, e) / a0);
    const auto mu = mu_of(m.positions, e);
    mu_max = std::max(mu_max, std::abs(mu));
    mu_sum += std::abs(mu);
    dmu += std::abs(mu - mu_of(truth.positions, e));
  }
  auto rel_std = [](std::vector<double> v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x / mean - 1) * (x / mean - 1);
    return std::sqrt(ss / v.size());
  };
  CHECK(r.task == "deq2d");
  CHECK(r.std_rho_orig == doctest::Approx(rel_std(rho0)).epsilon(1e-10));
  CHECK(r.std_rho_map == doctest::Approx(rel_std(rho)).epsilon(1e-10));
  CHECK(r.min_jacobian == doctest::Approx(min_area_ratio).epsilon(1e-10));
  CHECK(*r.max_abs_mu == doctest::Approx(mu_max).epsilon(1e-10));
  CHECK(*r.mean_abs_mu == doctest::Approx(mu_sum / ne).epsilon(1e-10));
  CHECK(*r.mean_abs_dmu == doctest::Approx(dmu / ne).epsilon(1e-10));
  CHECK(*r.mean_abs_dd == doctest::Approx((m.positions - truth.positions).rowwise().norm().mean()).epsilon(1e-12));
  CHECK(r.fold_count == 0);
}

TEST_CASE("CSV quoting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  CHECK(csv_line({"x", "y,z"}) == "x,\"y,z\"\r\n");
  CHECK(format_number(0.5) == "0.5");
}

TEST_CASE("histogram of identical values collapses to one bin") {
  const auto dir = scratch("hist");
  const auto path = (dir / "h.svg").string();
  plot_histogram(std::vector<double>(10, 2.5), path, "flat");
  const std::string svg = slurp(path);
  CHECK(svg.find("data-count=\"10\"") != std::string::npos);
  std::size_t rects = 0;
  for (std::size_t p = svg.find("<rect x="); p != std::string::npos; p = svg.find("<rect x=", p + 1)) ++rects;
  CHECK(rects == 1);
  CHECK_THROWS_AS(plot_histogram({}, path), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("compiled table constants") {
  const auto& t = paper_tables();
  for (int k = 2; k <= 9; ++k) {
    REQUIRE(t.contains(std::to_string(k)));
    CHECK(t[std::to_string(k)]["rows"].size() == 4);
  }
  CHECK(t["4"]["rows"][0][2].get<double>() == 0.453812);
  CHECK(t["7"]["rows"][0][2].get<double>() == 0.319948);
  CHECK(t["2"]["columns"][2] == "mean(|Δd|)");
}

TEST_CASE("inference and table reproduction with an untrained checkpoint") {
  const auto dir = scratch("repro");
  const std::string ck_dir = tiny_checkpoint(dir / "ckpt");
  surrogate::Checkpoint ck = surrogate::load_checkpoint(ck_dir);
  CHECK(checkpoint_task(ck) == losses::Task::Deq2d);
  CHECK(checkpoint_boundary(ck) == BoundaryKind::Square);
  const Inference inf = infer(ck, test_density(TestDensity::A, 24, 2));
  for (int v : inf.map.grid->boundary_vertices())
    CHECK((inf.map.positions.row(v) - inf.map.grid->vertices.row(v)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(infer(ck, test_density(TestDensity::A, 10, 3)), ConfigError);

  ReproduceOptions o;
  o.table = 4;
  o.desk_scale = true;
  o.ckpt = ck_dir;
  o.out_dir = (dir / "out").string();
  const TableOutput out = reproduce(o);
  CHECK(fs::exists(out.path));
  const auto& cols = paper_tables()["4"]["columns"];
  for (std::size_t i = 0; i < cols.size(); ++i) CHECK(out.header[i] == cols[i].get<std::string>());
  CHECK(out.rows.size() == 4);
  o.table = 7;
  CHECK_THROWS_AS(reproduce(o), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("off-grid inference reads the field on the encoding grid") {
  const auto dir = scratch("encode");
  surrogate::Checkpoint ck = surrogate::load_checkpoint(tiny_checkpoint(dir / "ckpt"));
  InferOptions native;
  native.encode_res = 0;
  InferOptions at16;
  at16.encode_res = 16;
  const ParamField field = test_density(TestDensity::B, 31, 2);
  const Inference fine = infer(ck, field, at16);
  const Inference coarse = infer(ck, sample(*field.function, 16, FieldKind::Density2d), native);
  CHECK(coarse.encode_res == 16);
  CHECK(fine.encode_res == 16);
  // Every other vertex of the 31-grid lies on the 16-grid, where ψ is read without interpolation.
  double worst = 0.0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      worst = std::max(worst, (fine.map.positions.row(2 * i * 31 + 2 * j) - coarse.map.positions.row(i * 16 + j))
                                  .cwiseAbs()
                                  .maxCoeff());
  CHECK(worst < 1e-6);
  for (int v : fine.map.grid->boundary_vertices())
    CHECK((fine.map.positions.row(v) - fine.map.grid->vertices.row(v)).cwiseAbs().maxCoeff() == 0.0);
  // Default: the query resolution clamped to the training range.
  CHECK(infer(ck, test_density(TestDensity::B, 24, 2)).encode_res == 48);
  CHECK(infer(ck, test_density(TestDensity::B, 80, 2)).encode_res == 64);
  fs::remove_all(dir);
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch("cli");
  const std::string field = (dir / "a.gfd").string();
  CHECK(cli({"synth", "--task", "density2d", "--test-id", "a", "--res", "16", "--out", field}) == 0);
  CHECK(fs::exists(field));
  CHECK(cli({"synth", "--task", "density2d", "--res", "4", "--out", field}) == 1);
  CHECK(cli({"synth", "--task", "beltrami3d", "--out", field}) == 1);
  CHECK(cli({"frobnicate"}) == 1);
  CHECK(cli({"--help"}) == 0);
  const std::string map = (dir / "dem.gmp").string();
  CHECK(cli({"oracle", "dem", "--density", field, "--out", map}) == 0);
  CHECK(cli({"eval", "--map", map, "--field", field, "--report", (dir / "r.csv").string()}) == 0);
  CHECK(cli({"eval", "--map", (dir / "none.gmp").string(), "--field", field}) == 1);
  CHECK(cli({"infer", "--ckpt", (dir / "none").string(), "--field", field, "--out", map}) == 1);
  CHECK(cli({"plot", "--kind", "mapped_grid", "--map", map, "--out", (dir / "g.svg").string()}) == 0);
  CHECK(cli({"selfcheck", "--suite", "refine"}) == 0);
  fs::remove_all(dir);
}

}  // TEST_SUITE
