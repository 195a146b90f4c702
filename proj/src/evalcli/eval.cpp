#include "geomap/evalcli.hpp"
#include "geomap/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace geomap::evalcli {

namespace F = torch::nn::functional;

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out + "\r\n";
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

EvalReport eval_map(const MapField& map, const ParamField& field, const MapField* truth) {
  const SimplicialGrid& grid = *map.grid;
  if (field.dim != grid.dim || field.num_points() != grid.num_vertices())
    throw ConfigError("field and map are defined on different grids");
  EvalReport r;
  r.task = field.kind == FieldKind::Beltrami2d ? "bc2d" : field.kind == FieldKind::Density2d ? "deq2d" : "dem3d";

  const JacobianField J = element_jacobians(map);
  r.min_jacobian = std::numeric_limits<double>::infinity();
  for (double d : J.det) {
    r.min_jacobian = std::min(r.min_jacobian, d);
    if (d <= 0.0) ++r.fold_count;
  }
  BeltramiField mu;
  if (grid.dim == 2) {
    mu = beltrami_per_element(map);
    double mx = 0.0, sum = 0.0;
    for (const auto& m : mu.mu) {
      mx = std::max(mx, std::abs(m));
      sum += std::abs(m);
    }
    r.max_abs_mu = mx;
    r.mean_abs_mu = sum / mu.mu.size();
  }
  if (field.kind != FieldKind::Beltrami2d) {
    const std::vector<double> pops = element_populations(grid, field.values);
    MapField ident = identity_map(map.grid);
    r.std_rho_orig = element_density(ident, pops).std_rho_tilde;
    r.std_rho_map = element_density(map, pops).std_rho_tilde;
  }
  if (truth) {
    if (truth->grid->num_vertices() != grid.num_vertices() || truth->dim() != grid.dim)
      throw ConfigError("truth map does not match the evaluated map");
    double dd = 0.0;
    for (int v = 0; v < grid.num_vertices(); ++v) dd += (truth->positions.row(v) - map.positions.row(v)).norm();
    r.mean_abs_dd = dd / grid.num_vertices();
    if (grid.dim == 2) {
      const BeltramiField mt = beltrami_per_element(*truth);
      double dm = 0.0;
      for (std::size_t e = 0; e < mt.mu.size(); ++e) dm += std::abs(mt.mu[e] - mu.mu[e]);
      r.mean_abs_dmu = dm / mt.mu.size();
    }
  }
  return r;
}

std::vector<std::string> report_columns() {
  return {"task",        "time_s",      "std_rho_orig", "std_rho_map",  "min_jacobian",
          "max_abs_mu",  "mean_abs_mu", "mean_abs_dd",  "mean_abs_dmu", "fold_count"};
}

std::vector<std::string> report_row(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  return {r.task,
          format_number(r.time_s),
          format_number(r.std_rho_orig),
          format_number(r.std_rho_map),
          format_number(r.min_jacobian),
          opt(r.max_abs_mu),
          opt(r.mean_abs_mu),
          opt(r.mean_abs_dd),
          opt(r.mean_abs_dmu),
          std::to_string(r.fold_count)};
}

void write_reports(const std::string& path, const std::vector<EvalReport>& reports) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << csv_line(report_columns());
  for (const auto& r : reports) out << csv_line(report_row(r));
}

torch::Tensor element_target(losses::Task task, const ParamField& field, const SimplicialGrid& grid) {
  if (field.function) return training::loss_target(task, field, grid);
  if (field.num_points() != grid.num_vertices()) throw ConfigError("field does not match the grid");
  if (task != losses::Task::Bc2d) return torch::tensor(element_populations(grid, field.values), torch::kFloat64);
  const int ne = grid.num_elements();
  std::vector<double> mu(2 * static_cast<std::size_t>(ne), 0.0);
  for (int e = 0; e < ne; ++e)
    for (int k = 0; k < 3; ++k) {
      const int v = grid.elements(e, k);
      mu[2 * e] += field.value(0, v) / 3.0;
      mu[2 * e + 1] += field.value(1, v) / 3.0;
    }
  return torch::tensor(mu, torch::kFloat64).view({ne, 2});
}

losses::Task checkpoint_task(const surrogate::Checkpoint& ck) {
  if (ck.manifest.contains("task")) return losses::task_from_string(ck.manifest["task"].get<std::string>());
  if (ck.config.dim == 3) return losses::Task::Dem3d;
  return ck.config.in_channels == 4 ? losses::Task::Bc2d : losses::Task::Deq2d;
}

BoundaryKind checkpoint_boundary(const surrogate::Checkpoint& ck) {
  return boundary_kind_from_string(ck.manifest.value("boundary", std::string("square")));
}

double checkpoint_lambda(const surrogate::Checkpoint& ck) {
  if (ck.manifest.contains("train") && ck.manifest["train"].contains("lambda_hr"))
    return ck.manifest["train"]["lambda_hr"].get<double>();
  return training::preset(checkpoint_task(ck)).lambda_hr;
}

namespace {

FieldKind task_field_kind(losses::Task task) {
  switch (task) {
    case losses::Task::Bc2d: return FieldKind::Beltrami2d;
    case losses::Task::Deq2d: return FieldKind::Density2d;
    case losses::Task::Dem3d: return FieldKind::Density3d;
  }
  return FieldKind::Density2d;
}

int encoding_resolution(const surrogate::Checkpoint& ck, int query_res, const InferOptions& options) {
  if (options.encode_res) {
    if (*options.encode_res == 0) return query_res;
    if (*options.encode_res < surrogate::kMinSpatial) throw ConfigError("encoding resolution must be >= 8");
    return *options.encode_res;
  }
  if (!ck.manifest.contains("train") || !ck.manifest["train"].contains("res_range")) return query_res;
  const auto& range = ck.manifest["train"]["res_range"];
  return std::clamp(query_res, range.at(0).get<int>(), range.at(1).get<int>());
}

// ψ at the vertices of `grid`, with the field read on an enc^dim grid. Off the query grid
// the field comes from its closed form when known, otherwise by multilinear resampling.
Points query_displacement(surrogate::MultiResUNet& model, const ParamField& field, const SimplicialGrid& grid, int enc) {
  if (enc == field.res.front()) return surrogate::predict_displacement(model, encode_input(field));
  torch::NoGradGuard no_grad;
  const auto dtype = model->parameters().front().scalar_type();
  torch::Tensor input;
  if (field.function) {
    input = surrogate::to_torch(encode_input(sample(*field.function, enc, field.kind)), dtype);
  } else {
    auto opts = F::InterpolateFuncOptions()
                    .size(std::vector<std::int64_t>(static_cast<std::size_t>(field.dim), enc))
                    .align_corners(true);
    if (field.dim == 2) {
      opts.mode(torch::kBilinear);
    } else {
      opts.mode(torch::kTrilinear);
    }
    input = F::interpolate(surrogate::to_torch(encode_input(field), dtype), opts);
  }
  const torch::Tensor psi = model->forward(input);
  const torch::Tensor rows =
      training::sample_displacement(psi, losses::to_tensor(grid.vertices, dtype)).to(torch::kFloat64).contiguous();
  if (!torch::isfinite(rows).all().item<bool>()) throw NumericalError("network produced non-finite displacement");
  Points out(rows.size(0), rows.size(1));
  std::copy(rows.data_ptr<double>(), rows.data_ptr<double>() + rows.numel(), out.data());
  return out;
}

}  // namespace

Inference infer(surrogate::Checkpoint& ck, const ParamField& field, const InferOptions& options) {
  const losses::Task task = checkpoint_task(ck);
  if (field.kind != task_field_kind(task))
    throw ConfigError("checkpoint was trained for " + losses::to_string(task) + " but the field is " +
                      to_string(field.kind));
  const surrogate::BoundaryMask mask{options.boundary.value_or(checkpoint_boundary(ck))};
  const auto start = std::chrono::steady_clock::now();
  auto grid = std::make_shared<const SimplicialGrid>(build_grid(field.res.front(), field.dim));
  Inference out;
  out.encode_res = encoding_resolution(ck, field.res.front(), options);
  const Points psi = query_displacement(ck.model, field, *grid, out.encode_res);
  if (options.refine) {
    const torch::Tensor target = element_target(task, field, *grid);
    const losses::LossConfig lc{task, checkpoint_lambda(ck)};
    const double pen = options.refine_spec.lambda_pen;
    auto objective = [&](const MapField& m) { return refine::task_objective(lc, m, target, pen); };
    refine::Refined r = refine::refine_alpha(grid, psi, mask, objective, options.refine_spec);
    out.map = std::move(r.map);
    out.refinement = r.result;
  } else {
    out.map = surrogate::apply_boundary(grid, psi, mask);
  }
  out.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace geomap::evalcli
