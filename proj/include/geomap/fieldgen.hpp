#pragma once

#include "geomap/common.hpp"
#include "geomap/geometry.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

namespace geomap {

enum class FieldKind { Beltrami2d, Density2d, Density3d };

std::string to_string(FieldKind kind);
FieldKind field_kind_from_string(const std::string& s);
int field_dim(FieldKind kind);
int field_channels(FieldKind kind);

/// Localized non-smooth perturbation: uniform-noise and step plateaus on axis-aligned boxes.
struct NonsmoothSpec {
  int patch_count = 3;         ///< at most 3
  double patch_fraction = 0.1; ///< box measure as a fraction of the domain, at most 0.1
  double step_amplitude = 0.5;
  double noise_amplitude = 0.2;
};

/// Parameters of the randomized sinusoidal field synthesis.
struct SynthSpec {
  std::uint64_t seed = 0;
  int modes_lo = 1;
  int modes_hi = 50;
  double amp_lo = -1.0;
  double amp_hi = 1.0;
  double freq_lo = 0.1;  ///< frequencies are drawn log-uniformly
  double freq_hi = 8.0;
  double phase_lo = 0.0;
  double phase_hi = 6.283185307179586;
  double k_max = 0.9;    ///< sup-norm cap for Beltrami fields
  bool real_mu = false;  ///< literal real-valued Beltrami variant
  std::optional<NonsmoothSpec> nonsmooth;

  void validate() const;

  static SynthSpec beltrami2d(std::uint64_t seed);
  static SynthSpec density2d(std::uint64_t seed);
  static SynthSpec density3d(std::uint64_t seed);
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

/// Closed-form multi-channel field on the unit domain. Grid-dependent constants
/// (sup-norm scaling, positivity shift, mass normalization) are frozen into
/// `scale`/`offset` when a field is synthesized, so the same function can be
/// evaluated at any resolution.
struct FieldFunction {
  int dim = 2;
  int channels = 1;
  /// Raw closed form: writes `channels` values for point x.
  std::function<void(std::span<const double> x, std::span<double> out)> raw;
  std::vector<double> scale;   ///< per channel
  std::vector<double> offset;  ///< per channel, applied after scaling
  bool zero_on_boundary = false;

  void operator()(std::span<const double> x, std::span<double> out) const;
};

/// Sampled parameter field on a structured N^dim vertex grid.
struct ParamField {
  int dim = 2;
  std::vector<int> res;        ///< per axis
  int channels = 1;
  FieldKind kind = FieldKind::Density2d;
  std::vector<double> values;  ///< channel-major, then row-major over vertices
  std::vector<double> coords;  ///< axis-major, then row-major over vertices
  std::uint64_t seed = 0;
  nlohmann::json spec;         ///< provenance; enough to re-synthesize at another resolution
  std::shared_ptr<const FieldFunction> function;  ///< closed form, when known

  int num_points() const;
  double value(int channel, int vertex) const { return values[static_cast<std::size_t>(channel) * num_points() + vertex]; }
  std::vector<double> channel(int c) const;
  /// Validates the kind-specific invariants; throws ConfigError.
  void validate() const;
};

/// Regular coordinates i/(N-1) for an N^dim grid, axis-major.
std::vector<double> regular_coords(int res, int dim);

/// Evaluates a closed form at every vertex of an N^dim grid.
ParamField sample(const FieldFunction& f, int res, FieldKind kind);

ParamField synth_beltrami_2d(const SynthSpec& spec, int res);
ParamField synth_density(const SynthSpec& spec, int res, int dim);

enum class TestMap { T1, T2, T3, T4 };
TestMap test_map_from_string(const std::string& s);
std::string to_string(TestMap id);

struct TestMapParams {
  double a = -1.0;  ///< negative: use the defaults for the map
  double b = -1.0;
};

/// Evaluates a test map at one point.
std::array<double, 2> eval_test_map(TestMap id, double x, double y, const TestMapParams& params = {});
MapField test_map(TestMap id, int res, const TestMapParams& params = {});

/// Beltrami field induced by a test map, sampled per vertex (measure-weighted
/// average of the per-element coefficients), as a beltrami2d ParamField.
ParamField test_map_beltrami(TestMap id, int res, const TestMapParams& params = {});

enum class TestDensity { A, B, C, D, MultiFrequency };
TestDensity test_density_from_string(const std::string& s);
std::string to_string(TestDensity id);

/// Un-normalized closed form of a test density (before the positivity shift).
double raw_test_density(TestDensity id, int dim, std::span<const double> x);
ParamField test_density(TestDensity id, int res, int dim);

/// Unit-mass normalization with lumped P1 vertex weights. Positivity shift is
/// p - min(p) + kPositivityFloor over the vertex samples.
inline constexpr double kPositivityFloor = 0.1;
double discrete_mass(const std::vector<double>& vertex_values, int res, int dim);

/// Gradient-adaptive jitter of the vertex coordinates driven by a Sobol sequence.
/// Displacement per axis = scale * h * (|grad p| / max|grad p|) * (2 s - 1), s in [0,1).
/// `skip` selects a disjoint block of the sequence (one block per training step).
Points sobol_jitter(int res, const ParamField& field, double scale, std::uint64_t skip = 0);
inline constexpr double kDefaultJitterScale = 0.35;

/// Rebuilds a field from its provenance spec at another resolution.
ParamField resynthesize(const nlohmann::json& spec, int res);

/// [x_1..x_d, p_1..p_m] channel stack with the field's spatial shape.
GridTensor encode_input(const ParamField& field);

}  // namespace geomap
