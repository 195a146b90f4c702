#include "geomap/fieldgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

namespace geomap {

void SynthSpec::validate() const {
  if (!(k_max < 1.0) || !(k_max > 0.0)) throw ConfigError("k_max must lie in (0, 1), got " + std::to_string(k_max));
  if (!(freq_lo > 0.0) || freq_hi < freq_lo) throw ConfigError("frequency range must be positive and ordered");
  if (modes_lo < 1 || modes_hi < modes_lo) throw ConfigError("mode count range must satisfy 1 <= lo <= hi");
  if (amp_hi < amp_lo) throw ConfigError("amplitude range is inverted");
  if (phase_hi < phase_lo) throw ConfigError("phase range is inverted");
  if (nonsmooth) {
    if (nonsmooth->patch_count < 0 || nonsmooth->patch_count > 3) throw ConfigError("nonsmooth patch count must be in [0, 3]");
    if (!(nonsmooth->patch_fraction > 0.0) || nonsmooth->patch_fraction > 0.1)
      throw ConfigError("nonsmooth patch fraction must be in (0, 0.1]");
  }
}

SynthSpec SynthSpec::beltrami2d(std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  return s;
}

SynthSpec SynthSpec::density2d(std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  return s;
}

SynthSpec SynthSpec::density3d(std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  s.modes_lo = 4;
  s.modes_hi = 40;
  s.freq_hi = 5.0;
  return s;
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"seed", s.seed},         {"modes", {s.modes_lo, s.modes_hi}}, {"amp", {s.amp_lo, s.amp_hi}},
                     {"freq", {s.freq_lo, s.freq_hi}}, {"phase", {s.phase_lo, s.phase_hi}}, {"k_max", s.k_max},
                     {"real_mu", s.real_mu}};
  if (s.nonsmooth) {
    j["nonsmooth"] = {{"patch_count", s.nonsmooth->patch_count},
                      {"patch_fraction", s.nonsmooth->patch_fraction},
                      {"step_amplitude", s.nonsmooth->step_amplitude},
                      {"noise_amplitude", s.nonsmooth->noise_amplitude}};
  }
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  s = SynthSpec{};
  s.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("modes")) { s.modes_lo = j["modes"][0]; s.modes_hi = j["modes"][1]; }
  if (j.contains("amp")) { s.amp_lo = j["amp"][0]; s.amp_hi = j["amp"][1]; }
  if (j.contains("freq")) { s.freq_lo = j["freq"][0]; s.freq_hi = j["freq"][1]; }
  if (j.contains("phase")) { s.phase_lo = j["phase"][0]; s.phase_hi = j["phase"][1]; }
  s.k_max = j.value("k_max", 0.9);
  s.real_mu = j.value("real_mu", false);
  if (j.contains("nonsmooth")) {
    NonsmoothSpec n;
    const auto& ns = j["nonsmooth"];
    n.patch_count = ns.value("patch_count", n.patch_count);
    n.patch_fraction = ns.value("patch_fraction", n.patch_fraction);
    n.step_amplitude = ns.value("step_amplitude", n.step_amplitude);
    n.noise_amplitude = ns.value("noise_amplitude", n.noise_amplitude);
    s.nonsmooth = n;
  }
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Mode {
  double amp;
  std::array<double, 3> freq;
  std::array<double, 3> phase;
};

struct Patch {
  std::array<double, 3> lo, hi;
  double step;
  std::uint64_t noise_key;
};

/// One scalar random field: sum_k A_k sin(.) cos(.) [sin(.)] plus optional patches.
struct ModalField {
  int dim = 2;
  std::vector<Mode> modes;
  std::vector<Patch> patches;
  double noise_amplitude = 0.0;

  double operator()(std::span<const double> x) const;
};

// Deterministic per-point noise in [-1, 1): a splitmix64 hash of the coordinate bits.
double point_noise(std::uint64_t key, std::span<const double> x) {
  std::uint64_t h = key;
  for (double xi : x) {
    std::uint64_t bits;
    std::memcpy(&bits, &xi, sizeof bits);
    h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h ^= h >> 31;
  }
  return 2.0 * static_cast<double>(h >> 11) * 0x1.0p-53 - 1.0;
}

double ModalField::operator()(std::span<const double> x) const {
  double s = 0.0;
  for (const Mode& m : modes) {
    double term = m.amp * std::sin(kTwoPi * m.freq[0] * x[0] + m.phase[0]) *
                  std::cos(kTwoPi * m.freq[1] * x[1] + m.phase[1]);
    if (dim == 3) term *= std::sin(kTwoPi * m.freq[2] * x[2] + m.phase[2]);
    s += term;
  }
  for (const Patch& p : patches) {
    bool inside = true;
    for (int a = 0; a < dim; ++a) inside = inside && x[a] >= p.lo[a] && x[a] <= p.hi[a];
    if (inside) s += p.step + noise_amplitude * point_noise(p.noise_key, x);
  }
  return s;
}

ModalField draw_modal_field(const SynthSpec& spec, int dim, std::mt19937_64& rng) {
  ModalField f;
  f.dim = dim;
  std::uniform_int_distribution<int> count(spec.modes_lo, spec.modes_hi);
  std::uniform_real_distribution<double> amp(spec.amp_lo, std::nextafter(spec.amp_hi, spec.amp_hi + 1.0));
  std::uniform_real_distribution<double> log_freq(std::log(spec.freq_lo), std::log(spec.freq_hi));
  std::uniform_real_distribution<double> phase(spec.phase_lo, spec.phase_hi);
  const int n = count(rng);
  f.modes.resize(n);
  for (Mode& m : f.modes) {
    m.amp = spec.amp_lo == spec.amp_hi ? spec.amp_lo : amp(rng);
    for (int a = 0; a < 3; ++a) m.freq[a] = std::exp(log_freq(rng));
    for (int a = 0; a < 3; ++a) m.phase[a] = phase(rng);
  }
  if (spec.nonsmooth) {
    const NonsmoothSpec& ns = *spec.nonsmooth;
    const double side = std::pow(ns.patch_fraction, 1.0 / dim);
    std::uniform_real_distribution<double> corner(0.0, 1.0 - side);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    f.noise_amplitude = ns.noise_amplitude;
    for (int k = 0; k < ns.patch_count; ++k) {
      Patch p{};
      for (int a = 0; a < dim; ++a) {
        p.lo[a] = corner(rng);
        p.hi[a] = p.lo[a] + side;
      }
      p.step = ns.step_amplitude * unit(rng);
      p.noise_key = rng();
      f.patches.push_back(p);
    }
  }
  return f;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace

ParamField synth_beltrami_2d(const SynthSpec& spec, int res) {
  spec.validate();
  if (res < 8) throw ConfigError("Beltrami field resolution must be >= 8");
  std::mt19937_64 rng = make_rng(spec.seed, 1);
  const ModalField re = draw_modal_field(spec, 2, rng);
  const ModalField im = draw_modal_field(spec, 2, rng);
  const bool real_only = spec.real_mu;

  FieldFunction f;
  f.dim = 2;
  f.channels = 2;
  f.raw = [re, im, real_only](std::span<const double> x, std::span<double> out) {
    out[0] = re(x);
    out[1] = real_only ? 0.0 : im(x);
  };
  f.scale = {1.0, 1.0};
  f.offset = {0.0, 0.0};
  f.zero_on_boundary = true;

  ParamField raw = sample(f, res, FieldKind::Beltrami2d);
  double max_mod = 0.0;
  const int n = raw.num_points();
  for (int v = 0; v < n; ++v) max_mod = std::max(max_mod, std::hypot(raw.values[v], raw.values[n + v]));
  if (max_mod > spec.k_max) {
    // Rounding in the product can land a hair above k_max; shave one ulp-scale margin.
    const double s = spec.k_max / max_mod * (1.0 - 1e-15);
    f.scale = {s, s};
  }
  ParamField field = sample(f, res, FieldKind::Beltrami2d);
  field.seed = spec.seed;
  field.spec = {{"task", "beltrami2d"}, {"synth", spec}};
  return field;
}

ParamField synth_density(const SynthSpec& spec, int res, int dim) {
  spec.validate();
  if (res < 8) throw ConfigError("density field resolution must be >= 8");
  if (dim != 2 && dim != 3) throw ConfigError("density dimension must be 2 or 3");
  std::mt19937_64 rng = make_rng(spec.seed, static_cast<std::uint64_t>(dim));
  const ModalField p = draw_modal_field(spec, dim, rng);
  const FieldKind kind = dim == 2 ? FieldKind::Density2d : FieldKind::Density3d;

  FieldFunction f;
  f.dim = dim;
  f.channels = 1;
  f.raw = [p](std::span<const double> x, std::span<double> out) { out[0] = p(x); };
  f.scale = {1.0};
  f.offset = {0.0};

  // Sup-norm cap at 1 keeps the contrast of random densities comparable to the test set,
  // then shift to strict positivity and normalize to unit mass.
  const ParamField raw = sample(f, res, kind);
  const auto [mn_it, mx_it] = std::minmax_element(raw.values.begin(), raw.values.end());
  const double sup = std::max(std::abs(*mn_it), std::abs(*mx_it));
  const double s = sup > 1.0 ? 1.0 / sup : 1.0;
  const double o = -(*mn_it) * s + kPositivityFloor;
  std::vector<double> shifted(raw.values.size());
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] = raw.values[i] * s + o;
  const double mass = discrete_mass(shifted, res, dim);
  f.scale = {s / mass};
  f.offset = {o / mass};

  ParamField field = sample(f, res, kind);
  field.seed = spec.seed;
  field.spec = {{"task", to_string(kind)}, {"synth", spec}};
  return field;
}

}  // namespace geomap
