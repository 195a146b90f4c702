#include "geomap/evalcli.hpp"
#include "geomap/oracles.hpp"
#include "geomap/training.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace geomap::evalcli {

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("GEOMAP_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("GEOMAP_SEED must be a non-negative integer");
    }
  }
  return 0;
}

ParamField at_resolution(const ParamField& field, int res) {
  if (res <= 0 || res == field.res.front()) return field;
  return resynthesize(field.spec, res);
}

BeltramiField element_mu(const ParamField& field, const SimplicialGrid& grid) {
  if (field.kind != FieldKind::Beltrami2d) throw ConfigError("expected a beltrami2d field");
  const torch::Tensor t = element_target(losses::Task::Bc2d, field, grid).contiguous();
  BeltramiField mu;
  mu.mu.resize(grid.num_elements());
  const double* p = t.data_ptr<double>();
  for (int e = 0; e < grid.num_elements(); ++e) mu.mu[e] = {p[2 * e], p[2 * e + 1]};
  return mu;
}

void print_report(const EvalReport& r) {
  const auto cols = report_columns();
  const auto row = report_row(r);
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (!row[i].empty()) std::cout << cols[i] << " = " << row[i] << "\n";
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"geomap: neural surrogates for quasi-conformal and density-equalizing maps"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a parameter field (GFD1)");
  std::string synth_task, test_id, synth_out;
  std::optional<std::uint64_t> synth_seed;
  int synth_res = 64;
  bool synth_nonsmooth = false, synth_real = false;
  synth->add_option("--task", synth_task, "beltrami2d | density2d | density3d")->required()
      ->check(CLI::IsMember({"beltrami2d", "density2d", "density3d"}));
  synth->add_option("--seed", synth_seed, "random seed (default: GEOMAP_SEED or 0)");
  synth->add_option("--res", synth_res, "vertices per axis")->check(CLI::Range(8, 1024));
  synth->add_option("--test-id", test_id, "a | b | c | d | m for densities, T1..T4 for Beltrami fields");
  synth->add_flag("--nonsmooth", synth_nonsmooth, "add local non-smooth patches to random fields");
  synth->add_flag("--real-mu", synth_real, "real-valued Beltrami field");
  synth->add_option("--out", synth_out, "output file")->required();

  // train
  auto* train = app.add_subcommand("train", "train a surrogate without labels");
  std::string train_task, train_out, train_config, train_boundary;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs;
  bool desk = false, resume = false, quiet = false;
  train->add_option("--task", train_task, "bc2d | deq2d | dem3d")->check(CLI::IsMember({"bc2d", "deq2d", "dem3d"}));
  train->add_flag("--desk-scale", desk, "shortened epochs and resolutions");
  train->add_option("--seed", train_seed, "random seed (default: GEOMAP_SEED or 0)");
  train->add_option("--out", train_out, "checkpoint directory")->required();
  train->add_option("--config", train_config, "JSON training configuration");
  train->add_option("--epochs", train_epochs, "override the number of epochs")->check(CLI::NonNegativeNumber);
  train->add_option("--boundary", train_boundary, "square | free")->check(CLI::IsMember({"square", "free"}));
  train->add_flag("--resume", resume, "continue the run stored in --out");
  train->add_flag("--quiet", quiet, "no progress output");

  // infer
  auto* inf = app.add_subcommand("infer", "predict a map for a field (GMP1)");
  std::string inf_ckpt, inf_field, inf_out, inf_boundary;
  int inf_res = 0;
  bool inf_refine = false;
  std::optional<int> inf_encode_res;
  inf->add_option("--ckpt", inf_ckpt, "checkpoint directory")->required();
  inf->add_option("--field", inf_field, "GFD1 field")->required();
  inf->add_option("--res", inf_res, "resynthesize the field at this resolution")->check(CLI::Range(8, 1024));
  inf->add_option("--boundary", inf_boundary, "square | free (default: as trained)")
      ->check(CLI::IsMember({"square", "free"}));
  inf->add_flag("--refine,!--no-refine", inf_refine, "optimize the stretch vector alpha");
  inf->add_option("--encode-res", inf_encode_res,
                  "grid the network reads the field on; 0 = query resolution (default: clamped to the training range)")
      ->check(CLI::NonNegativeNumber);
  inf->add_option("--out", inf_out, "output map")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "metrics of a map");
  std::string ev_map, ev_field, ev_truth, ev_report;
  ev->add_option("--map", ev_map, "GMP1 map")->required();
  ev->add_option("--field", ev_field, "GFD1 field")->required();
  ev->add_option("--truth", ev_truth, "GMP1 reference map for the displacement and mu differences");
  ev->add_option("--report", ev_report, "CSV report path");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "classical reference solvers");
  oracle->require_subcommand(1);
  auto* lbs = oracle->add_subcommand("lbs", "Linear Beltrami Solver");
  std::string lbs_mu, lbs_out;
  lbs->add_option("--mu", lbs_mu, "GFD1 beltrami2d field")->required();
  lbs->add_option("--out", lbs_out, "output map")->required();
  auto* dem = oracle->add_subcommand("dem", "diffusion density-equalizing map");
  std::string dem_density, dem_out;
  int dem_res = 0;
  oracles::DemOptions dem_opts;
  dem->add_option("--density", dem_density, "GFD1 density field")->required();
  dem->add_option("--res", dem_res, "resynthesize the density at this resolution")->check(CLI::Range(8, 1024));
  dem->add_option("--steps", dem_opts.max_steps, "step budget")->check(CLI::NonNegativeNumber);
  dem->add_option("--tol", dem_opts.tolerance, "stop once Std(rho~) falls below this");
  dem->add_option("--dt", dem_opts.dt, "time step (default 2 h^2)");
  dem->add_flag("--explicit", dem_opts.explicit_euler, "explicit Euler diffusion");
  dem->add_option("--out", dem_out, "output map")->required();

  // reproduce
  auto* rep = app.add_subcommand("reproduce", "regenerate a results table as CSV");
  ReproduceOptions rep_opts;
  rep->add_option("--table", rep_opts.table, "table number 2..9")->required()->check(CLI::Range(2, 9));
  rep->add_flag("--desk-scale", rep_opts.desk_scale, "annotate relaxed desk-scale targets");
  rep->add_option("--ckpt", rep_opts.ckpt, "checkpoint directory")->required();
  rep->add_option("--out-dir", rep_opts.out_dir, "output directory");
  rep->add_flag("--refine,!--no-refine", rep_opts.refine, "apply weight refinement");

  // plot
  auto* plot = app.add_subcommand("plot", "static SVG figures");
  std::string plot_kind, plot_map, plot_field, plot_truth, plot_out, plot_dem, plot_deq;
  plot->add_option("--kind", plot_kind, "mapped_grid | density_heatmap | mu_magnitude | histogram | dem_vs_deq")
      ->required()
      ->check(CLI::IsMember({"mapped_grid", "density_heatmap", "mu_magnitude", "histogram", "dem_vs_deq"}));
  plot->add_option("--map", plot_map, "GMP1 map");
  plot->add_option("--field", plot_field, "GFD1 field");
  plot->add_option("--truth", plot_truth, "reference map (histogram of |mu_truth - mu_pred|)");
  plot->add_option("--dem-map", plot_dem, "DEM map for dem_vs_deq");
  plot->add_option("--deq-map", plot_deq, "DEQ map for dem_vs_deq");
  plot->add_option("--out", plot_out, "output file (directory for dem_vs_deq)")->required();

  // selfcheck
  auto* self = app.add_subcommand("selfcheck", "run the brute-force oracle battery");
  std::string suite = "all";
  self->add_option("--suite", suite, "mu | loss | refine | all")->check(CLI::IsMember({"mu", "loss", "refine", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      const std::uint64_t seed = synth_seed.value_or(default_seed());
      ParamField f;
      if (!test_id.empty()) {
        if (synth_task == "beltrami2d") {
          f = test_map_beltrami(test_map_from_string(test_id), synth_res);
        } else {
          f = test_density(test_density_from_string(test_id), synth_res, synth_task == "density2d" ? 2 : 3);
        }
      } else if (synth_task == "beltrami2d") {
        SynthSpec s = SynthSpec::beltrami2d(seed);
        s.real_mu = synth_real;
        if (synth_nonsmooth) s.nonsmooth = NonsmoothSpec{};
        f = synth_beltrami_2d(s, synth_res);
      } else {
        const int dim = synth_task == "density2d" ? 2 : 3;
        SynthSpec s = dim == 2 ? SynthSpec::density2d(seed) : SynthSpec::density3d(seed);
        if (synth_nonsmooth) s.nonsmooth = NonsmoothSpec{};
        f = synth_density(s, synth_res, dim);
      }
      write_field(synth_out, f);
      return 0;
    }

    if (train->parsed()) {
      std::optional<training::Trainer> trainer;
      if (resume) {
        trainer.emplace(training::Trainer::resume(train_out));
      } else {
        training::TrainConfig cfg;
        if (!train_config.empty()) {
          std::ifstream in(train_config);
          if (!in) throw ConfigError("cannot open " + train_config);
          nlohmann::json j;
          try {
            in >> j;
          } catch (const nlohmann::json::exception& e) {
            throw ConfigError("malformed training config: " + std::string(e.what()));
          }
          if (!train_task.empty()) j["task"] = train_task;
          if (desk) j["desk_scale"] = true;
          cfg = j.get<training::TrainConfig>();
        } else {
          if (train_task.empty()) throw ConfigError("--task or --config is required");
          cfg = training::preset(losses::task_from_string(train_task), desk);
        }
        cfg.seed = train_seed.value_or(train_config.empty() ? default_seed() : cfg.seed);
        if (train_epochs) cfg.epochs = *train_epochs;
        if (!train_boundary.empty()) cfg.boundary = boundary_kind_from_string(train_boundary);
        cfg.validate();
        trainer.emplace(cfg);
      }
      trainer->run(train_out, [&](const training::StepResult& r) {
        if (!quiet && (r.epoch % 100 == 0 || r.epoch + 1 == trainer->config().epochs))
          std::cerr << "epoch " << r.epoch << " loss " << r.loss << " lr " << r.lr << " res " << r.res
                    << (r.skipped ? " (skipped)" : "") << "\n";
      });
      return 0;
    }

    if (inf->parsed()) {
      surrogate::Checkpoint ck = surrogate::load_checkpoint(inf_ckpt);
      const ParamField field = at_resolution(read_field(inf_field), inf_res);
      InferOptions opts;
      if (!inf_boundary.empty()) opts.boundary = boundary_kind_from_string(inf_boundary);
      opts.refine = inf_refine;
      opts.encode_res = inf_encode_res;
      const Inference r = infer(ck, field, opts);
      write_map(inf_out, r.map);
      std::cout << "time_s = " << format_number(r.time_s) << "\n";
      if (r.refinement) {
        std::cout << "alpha =";
        for (double a : r.refinement->alpha) std::cout << ' ' << format_number(a);
        std::cout << "\nobjective = " << format_number(r.refinement->objective) << " (unrefined "
                  << format_number(r.refinement->objective_unrefined) << ")\n";
      }
      return 0;
    }

    if (ev->parsed()) {
      const MapField map = read_map(ev_map);
      const ParamField field = read_field(ev_field);
      std::optional<MapField> truth;
      if (!ev_truth.empty()) truth = read_map(ev_truth);
      const EvalReport r = eval_map(map, field, truth ? &*truth : nullptr);
      if (!ev_report.empty()) write_reports(ev_report, {r});
      print_report(r);
      return 0;
    }

    if (lbs->parsed()) {
      const ParamField field = read_field(lbs_mu);
      auto grid = std::make_shared<const SimplicialGrid>(build_grid(field.res.front(), 2));
      write_map(lbs_out, oracles::lbs_solve(element_mu(field, *grid), grid));
      return 0;
    }

    if (dem->parsed()) {
      const ParamField field = at_resolution(read_field(dem_density), dem_res);
      const oracles::DemResult r = oracles::dem_diffusion_solve(field, dem_opts);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      write_map(dem_out, r.map);
      std::cout << "steps = " << r.steps << "\nstd_rho_map = " << format_number(r.std_history.back())
                << "\nconverged = " << (r.converged ? "true" : "false") << "\n";
      return 0;
    }

    if (rep->parsed()) {
      const TableOutput t = reproduce(rep_opts);
      std::cout << t.path << "\n";
      return 0;
    }

    if (plot->parsed()) {
      if (plot_kind == "dem_vs_deq") {
        if (plot_field.empty() || plot_dem.empty() || plot_deq.empty())
          throw ConfigError("dem_vs_deq needs --field, --dem-map and --deq-map");
        for (const auto& p : plot_dem_vs_deq(read_field(plot_field), read_map(plot_dem), read_map(plot_deq), plot_out))
          std::cout << p << "\n";
        return 0;
      }
      if (plot_map.empty()) throw ConfigError("--map is required for " + plot_kind);
      const MapField map = read_map(plot_map);
      if (plot_kind == "mapped_grid") {
        plot_mapped_grid(map, plot_out);
      } else if (plot_kind == "density_heatmap") {
        if (plot_field.empty()) throw ConfigError("--field is required for density_heatmap");
        plot_density_heatmap(map, read_field(plot_field), plot_out);
      } else if (plot_kind == "mu_magnitude") {
        plot_mu_magnitude(map, plot_out);
      } else {
        if (plot_truth.empty()) {
          plot_histogram(beltrami_per_element(map).modulus(), plot_out, "|mu|");
        } else {
          const BeltramiField a = beltrami_per_element(read_map(plot_truth)), b = beltrami_per_element(map);
          if (a.mu.size() != b.mu.size()) throw ConfigError("truth and map grids differ");
          std::vector<double> diff(a.mu.size());
          for (std::size_t e = 0; e < diff.size(); ++e) diff[e] = std::abs(a.mu[e] - b.mu[e]);
          plot_histogram(diff, plot_out, "|mu_truth - mu_pred|");
        }
      }
      return 0;
    }

    if (self->parsed()) {
      const oracles::CheckReport report = oracles::brute_force_checks(suite);
      for (const auto& l : report.lines)
        std::cout << (l.pass ? "PASS " : "FAIL ") << l.name << ": " << format_number(l.value) << " (" << l.detail
                  << ")\n";
      return report.all_pass() ? 0 : 2;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const c10::Error& e) {
    std::cerr << "numerical failure: " << e.what_without_backtrace() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace geomap::evalcli
