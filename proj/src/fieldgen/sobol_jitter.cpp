#include "geomap/fieldgen.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>

namespace geomap {

namespace {

// |grad p| per vertex by central differences (one-sided on the boundary), all channels pooled.
std::vector<double> gradient_magnitude(const ParamField& field) {
  const int res = field.res[0];
  const int dim = field.dim;
  const int n = field.num_points();
  const double h = 1.0 / (res - 1);
  std::vector<int> stride(dim);
  stride[dim - 1] = 1;
  for (int a = dim - 2; a >= 0; --a) stride[a] = stride[a + 1] * res;

  std::vector<double> g2(n, 0.0);
  for (int c = 0; c < field.channels; ++c) {
    const double* p = field.values.data() + static_cast<std::size_t>(c) * n;
    for (int v = 0; v < n; ++v) {
      for (int a = 0; a < dim; ++a) {
        const int idx = (v / stride[a]) % res;
        double d;
        if (idx == 0) {
          d = (p[v + stride[a]] - p[v]) / h;
        } else if (idx == res - 1) {
          d = (p[v] - p[v - stride[a]]) / h;
        } else {
          d = (p[v + stride[a]] - p[v - stride[a]]) / (2 * h);
        }
        g2[v] += d * d;
      }
    }
  }
  for (double& g : g2) g = std::sqrt(g);
  return g2;
}

}  // namespace

Points sobol_jitter(int res, const ParamField& field, double scale, std::uint64_t skip) {
  if (scale < 0.0) throw ConfigError("jitter scale must be non-negative");
  if (field.res.empty() || field.res[0] != res) throw ConfigError("jitter resolution does not match field");
  const int dim = field.dim;
  const int n = field.num_points();
  const double h = 1.0 / (res - 1);

  Points coords(n, dim);
  const std::vector<double> regular = regular_coords(res, dim);
  for (int v = 0; v < n; ++v)
    for (int a = 0; a < dim; ++a) coords(v, a) = regular[static_cast<std::size_t>(a) * n + v];
  if (scale == 0.0) return coords;

  const std::vector<double> grad = gradient_magnitude(field);
  const double gmax = *std::max_element(grad.begin(), grad.end());
  if (!(gmax > 0.0)) return coords;

  boost::random::sobol qrng(dim);
  // The first Sobol point is the origin, which would bias every vertex to -1.
  // Each skip advances past one full field's worth of points.
  qrng.discard(static_cast<std::uintmax_t>(dim) * (1 + skip * static_cast<std::uintmax_t>(n)));
  SimplicialGrid probe;
  probe.dim = dim;
  probe.res = res;
  for (int v = 0; v < n; ++v) {
    std::array<double, 3> s{};
    for (int a = 0; a < dim; ++a) s[a] = static_cast<double>(qrng()) * 0x1.0p-64;
    if (probe.on_boundary(v)) continue;
    const double magnitude = scale * h * grad[v] / gmax;
    for (int a = 0; a < dim; ++a) coords(v, a) = std::clamp(coords(v, a) + magnitude * (2.0 * s[a] - 1.0), 0.0, 1.0);
  }
  return coords;
}

}  // namespace geomap
