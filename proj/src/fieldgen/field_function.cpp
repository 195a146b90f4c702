#include "geomap/fieldgen.hpp"

#include <cmath>

namespace geomap {

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::Beltrami2d: return "beltrami2d";
    case FieldKind::Density2d: return "density2d";
    case FieldKind::Density3d: return "density3d";
  }
  return "density2d";
}

FieldKind field_kind_from_string(const std::string& s) {
  if (s == "beltrami2d") return FieldKind::Beltrami2d;
  if (s == "density2d") return FieldKind::Density2d;
  if (s == "density3d") return FieldKind::Density3d;
  throw ConfigError("unknown field kind '" + s + "'");
}

int field_dim(FieldKind kind) { return kind == FieldKind::Density3d ? 3 : 2; }
int field_channels(FieldKind kind) { return kind == FieldKind::Beltrami2d ? 2 : 1; }

void FieldFunction::operator()(std::span<const double> x, std::span<double> out) const {
  if (zero_on_boundary) {
    for (double xi : x)
      if (xi <= 0.0 || xi >= 1.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
      }
  }
  raw(x, out);
  for (int c = 0; c < channels; ++c) out[c] = out[c] * scale[c] + offset[c];
}

int ParamField::num_points() const {
  int n = 1;
  for (int r : res) n *= r;
  return n;
}

std::vector<double> ParamField::channel(int c) const {
  const int n = num_points();
  return {values.begin() + static_cast<std::ptrdiff_t>(c) * n, values.begin() + static_cast<std::ptrdiff_t>(c + 1) * n};
}

void ParamField::validate() const {
  if (dim != field_dim(kind)) throw ConfigError("field dimension does not match its kind");
  if (channels != field_channels(kind)) throw ConfigError("field channel count does not match its kind");
  if (static_cast<int>(res.size()) != dim) throw ConfigError("field resolution vector has wrong length");
  if (values.size() != static_cast<std::size_t>(channels) * num_points()) throw ConfigError("field value count mismatch");
  if (!coords.empty() && coords.size() != static_cast<std::size_t>(dim) * num_points())
    throw ConfigError("field coordinate count mismatch");
  for (double v : values)
    if (!std::isfinite(v)) throw ConfigError("field contains non-finite values");
  if (kind != FieldKind::Beltrami2d) {
    for (double v : values)
      if (v <= 0.0) throw ConfigError("density field must be strictly positive");
  }
}

std::vector<double> regular_coords(int res, int dim) {
  int n = 1;
  for (int a = 0; a < dim; ++a) n *= res;
  std::vector<double> coords(static_cast<std::size_t>(dim) * n);
  const double denom = static_cast<double>(res - 1);
  for (int v = 0; v < n; ++v) {
    int rem = v;
    for (int a = dim - 1; a >= 0; --a) {
      coords[static_cast<std::size_t>(a) * n + v] = (rem % res) / denom;
      rem /= res;
    }
  }
  return coords;
}

ParamField sample(const FieldFunction& f, int res, FieldKind kind) {
  ParamField field;
  field.dim = f.dim;
  field.res.assign(f.dim, res);
  field.channels = f.channels;
  field.kind = kind;
  field.coords = regular_coords(res, f.dim);
  const int n = field.num_points();
  field.values.resize(static_cast<std::size_t>(f.channels) * n);
  std::vector<double> x(f.dim), out(f.channels);
  for (int v = 0; v < n; ++v) {
    for (int a = 0; a < f.dim; ++a) x[a] = field.coords[static_cast<std::size_t>(a) * n + v];
    f(x, out);
    for (int c = 0; c < f.channels; ++c) field.values[static_cast<std::size_t>(c) * n + v] = out[c];
  }
  field.function = std::make_shared<FieldFunction>(f);
  return field;
}

double discrete_mass(const std::vector<double>& vertex_values, int res, int dim) {
  const SimplicialGrid grid = build_grid(res, dim);
  if (static_cast<int>(vertex_values.size()) != grid.num_vertices()) throw ConfigError("sample count does not match grid");
  return grid.vertex_weights().dot(Eigen::Map<const Eigen::VectorXd>(vertex_values.data(), vertex_values.size()));
}

GridTensor encode_input(const ParamField& field) {
  field.validate();
  const int n = field.num_points();
  GridTensor t;
  t.shape.push_back(field.dim + field.channels);
  for (int r : field.res) t.shape.push_back(r);
  t.data.reserve(static_cast<std::size_t>(field.dim + field.channels) * n);
  const std::vector<double> coords = field.coords.empty() ? regular_coords(field.res[0], field.dim) : field.coords;
  t.data.insert(t.data.end(), coords.begin(), coords.end());
  t.data.insert(t.data.end(), field.values.begin(), field.values.end());
  return t;
}

}  // namespace geomap
