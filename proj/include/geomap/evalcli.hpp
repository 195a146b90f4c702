#pragma once

#include "geomap/fieldgen.hpp"
#include "geomap/geometry.hpp"
#include "geomap/losses.hpp"
#include "geomap/refine.hpp"
#include "geomap/surrogate.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace geomap::evalcli {

// ---- persistence -------------------------------------------------------

/// GFD1: one JSON header line, then little-endian float64 values.
void write_field(const std::string& path, const ParamField& field);
/// Restores the closed form from the header spec when it reproduces the stored values.
ParamField read_field(const std::string& path);

/// GMP1: one JSON header line, then little-endian float64 positions, row-major.
void write_map(const std::string& path, const MapField& map);
MapField read_map(const std::string& path);

// ---- metrics -----------------------------------------------------------

struct EvalReport {
  std::string task;
  double time_s = 0.0;
  double std_rho_orig = 0.0;
  double std_rho_map = 0.0;
  double min_jacobian = 0.0;
  std::optional<double> max_abs_mu;  ///< planar maps only
  std::optional<double> mean_abs_mu;
  std::optional<double> mean_abs_dd;
  std::optional<double> mean_abs_dmu;
  int fold_count = 0;
};

/// Metrics of `map` for `field`. Density fields give the Std columns; a truth map gives the Δ columns.
EvalReport eval_map(const MapField& map, const ParamField& field, const MapField* truth = nullptr);

std::vector<std::string> report_columns();
std::vector<std::string> report_row(const EvalReport& r);
void write_reports(const std::string& path, const std::vector<EvalReport>& reports);

/// Quotes a CSV field when needed (RFC 4180).
std::string csv_field(const std::string& s);
std::string csv_line(const std::vector<std::string>& fields);
std::string format_number(double v);

// ---- inference ---------------------------------------------------------

/// Loss target for `field` on its own regular grid (closed form when present, samples otherwise).
torch::Tensor element_target(losses::Task task, const ParamField& field, const SimplicialGrid& grid);

struct InferOptions {
  std::optional<BoundaryKind> boundary;  ///< defaults to the checkpoint's training boundary
  bool refine = false;
  refine::RefineSpec refine_spec;
  /// Grid the network reads the field on. Unset: the query resolution clamped to the
  /// checkpoint's training range; 0: the query resolution itself.
  std::optional<int> encode_res;
};

struct Inference {
  MapField map;
  int encode_res = 0;
  double time_s = 0.0;
  std::optional<refine::AlphaResult> refinement;
};

losses::Task checkpoint_task(const surrogate::Checkpoint& ck);
BoundaryKind checkpoint_boundary(const surrogate::Checkpoint& ck);
double checkpoint_lambda(const surrogate::Checkpoint& ck);

Inference infer(surrogate::Checkpoint& ck, const ParamField& field, const InferOptions& options = {});

// ---- table reproduction -----------------------------------------------

/// Published table constants, parsed from the compiled-in JSON.
const nlohmann::json& paper_tables();

struct ReproduceOptions {
  int table = 4;
  bool desk_scale = false;
  std::string ckpt;
  std::string out_dir = ".";
  bool refine = false;
};

struct TableOutput {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Writes table_<k>.csv (and the refined variant when requested) and returns its content.
TableOutput reproduce(const ReproduceOptions& options);

// ---- plots -------------------------------------------------------------

/// Mapped mesh edges (2D) or three mid-plane lattice slices (3D).
void plot_mapped_grid(const MapField& map, const std::string& path, const std::string& title = "");
/// Per-element colour map; 3D values are shown on three mid-plane slices.
void plot_element_values(const MapField& map, const std::vector<double>& values, const std::string& path,
                         const std::string& title = "");
void plot_density_heatmap(const MapField& map, const ParamField& field, const std::string& path);
void plot_mu_magnitude(const MapField& map, const std::string& path);
void plot_histogram(const std::vector<double>& values, const std::string& path, const std::string& title = "",
                    int bins = 30);
/// Seven-panel DEM-versus-DEQ comparison; returns the panel files in caption order.
std::vector<std::string> plot_dem_vs_deq(const ParamField& field, const MapField& dem, const MapField& deq,
                                         const std::string& out_dir);

// ---- command line ------------------------------------------------------

/// Entry point of the geomap executable; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace geomap::evalcli
