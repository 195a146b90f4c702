#include "geomap/evalcli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace geomap::evalcli {

namespace {

constexpr double kPanel = 480.0;
constexpr double kMargin = 30.0;

std::string colour(double t) {
  // Piecewise-linear blue-to-yellow ramp.
  static const std::array<std::array<double, 3>, 5> stops{
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * (stops.size() - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - i;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
  return buf;
}

class Svg {
 public:
  Svg(double width, double height) : width_(width), height_(height) {}

  void text(double x, double y, const std::string& s, int size = 14) {
    if (s.empty()) return;
    body_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\"" << size << "\">"
          << escape(s) << "</text>\n";
  }
  void raw(const std::string& s) { body_ << s; }
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
        << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
  }

 private:
  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else if (c == '&') out += "&amp;";
      else out += c;
    }
    return out;
  }
  double width_, height_;
  std::ostringstream body_;
};

/// Maps a 2D point of a panel's bounding box into pixel space.
struct Frame {
  double ox, oy, x0, y0, scale;
  double px(double x) const { return ox + kMargin + (x - x0) * scale; }
  double py(double y) const { return oy + kMargin + kPanel - (y - y0) * scale; }
};

Frame frame_for(const std::vector<std::array<double, 2>>& pts, double ox, double oy) {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  for (const auto& p : pts) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  const double span = std::max(x1 - x0, y1 - y0);
  return {ox, oy, x0, y0, kPanel / span};
}

/// Three axis-aligned mid-plane slices of a 3D lattice: returns for each slice the
/// vertex indices of its cells (4 per cell) and the two projected axes.
struct Slice {
  int axis_u, axis_v;
  std::vector<std::array<int, 4>> cells;
};

std::vector<Slice> mid_slices(int n) {
  std::vector<Slice> out;
  const int mid = n / 2;
  auto id = [n](int i, int j, int k) { return (i * n + j) * n + k; };
  for (int fixed = 2; fixed >= 0; --fixed) {
    Slice s;
    s.axis_u = fixed == 0 ? 1 : 0;
    s.axis_v = fixed == 2 ? 1 : 2;
    for (int a = 0; a + 1 < n; ++a)
      for (int b = 0; b + 1 < n; ++b) {
        auto v = [&](int da, int db) {
          const int p = a + da, q = b + db;
          if (fixed == 2) return id(p, q, mid);
          if (fixed == 1) return id(p, mid, q);
          return id(mid, p, q);
        };
        s.cells.push_back({v(0, 0), v(1, 0), v(1, 1), v(0, 1)});
      }
    out.push_back(std::move(s));
  }
  return out;
}

std::string polygon(const Frame& f, const std::vector<std::array<double, 2>>& pts, const std::string& fill,
                    const std::string& stroke, double width) {
  std::ostringstream os;
  os << "<polygon points=\"";
  for (const auto& p : pts) os << f.px(p[0]) << ',' << f.py(p[1]) << ' ';
  os << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\"/>\n";
  return os.str();
}

void colour_bar(Svg& svg, double x, double lo, double hi) {
  for (int i = 0; i < 50; ++i) {
    std::ostringstream os;
    os << "<rect x=\"" << x << "\" y=\"" << kMargin + kPanel - (i + 1) * kPanel / 50 << "\" width=\"14\" height=\""
       << kPanel / 50 + 0.5 << "\" fill=\"" << colour(i / 49.0) << "\"/>\n";
    svg.raw(os.str());
  }
  svg.text(x + 18, kMargin + kPanel, format_number(lo), 11);
  svg.text(x + 18, kMargin + 10, format_number(hi), 11);
}

std::vector<double> vertex_values_from_elements(const SimplicialGrid& grid, const std::vector<double>& values) {
  std::vector<double> sum(grid.num_vertices(), 0.0), w(grid.num_vertices(), 0.0);
  for (int e = 0; e < grid.num_elements(); ++e)
    for (int k = 0; k <= grid.dim; ++k) {
      sum[grid.elements(e, k)] += values[e];
      w[grid.elements(e, k)] += 1.0;
    }
  for (std::size_t v = 0; v < sum.size(); ++v) sum[v] /= std::max(w[v], 1.0);
  return sum;
}

}  // namespace

void plot_mapped_grid(const MapField& map, const std::string& path, const std::string& title) {
  const SimplicialGrid& grid = *map.grid;
  const double stroke = std::max(0.2, 1.5 - grid.res / 80.0);
  if (grid.dim == 2) {
    Svg svg(kPanel + 2 * kMargin, kPanel + 2 * kMargin);
    std::vector<std::array<double, 2>> pts(grid.num_vertices());
    for (int v = 0; v < grid.num_vertices(); ++v) pts[v] = {map.positions(v, 0), map.positions(v, 1)};
    const Frame f = frame_for(pts, 0, 0);
    std::ostringstream os;
    for (int e = 0; e < grid.num_elements(); ++e)
      os << polygon(f, {pts[grid.elements(e, 0)], pts[grid.elements(e, 1)], pts[grid.elements(e, 2)]}, "none",
                    "#1f3b73", stroke);
    svg.raw(os.str());
    svg.text(kMargin, 20, title);
    svg.save(path);
    return;
  }
  const auto slices = mid_slices(grid.res);
  Svg svg(3 * (kPanel + 2 * kMargin), kPanel + 2 * kMargin);
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const Slice& sl = slices[s];
    std::vector<std::array<double, 2>> pts;
    for (const auto& c : sl.cells)
      for (int v : c) pts.push_back({map.positions(v, sl.axis_u), map.positions(v, sl.axis_v)});
    const Frame f = frame_for(pts, s * (kPanel + 2 * kMargin), 0);
    std::ostringstream os;
    for (std::size_t c = 0; c < sl.cells.size(); ++c)
      os << polygon(f, {pts[4 * c], pts[4 * c + 1], pts[4 * c + 2], pts[4 * c + 3]}, "none", "#1f3b73", stroke);
    svg.raw(os.str());
  }
  svg.text(kMargin, 20, title.empty() ? "mid-plane slices (xy, xz, yz)" : title + " (xy, xz, yz slices)");
  svg.save(path);
}

void plot_element_values(const MapField& map, const std::vector<double>& values, const std::string& path,
                         const std::string& title) {
  const SimplicialGrid& grid = *map.grid;
  if (static_cast<int>(values.size()) != grid.num_elements()) throw ConfigError("one value per element expected");
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  const double span = hi > lo ? hi - lo : 1.0;
  if (grid.dim == 2) {
    Svg svg(kPanel + 2 * kMargin + 80, kPanel + 2 * kMargin);
    std::vector<std::array<double, 2>> pts(grid.num_vertices());
    for (int v = 0; v < grid.num_vertices(); ++v) pts[v] = {map.positions(v, 0), map.positions(v, 1)};
    const Frame f = frame_for(pts, 0, 0);
    std::ostringstream os;
    for (int e = 0; e < grid.num_elements(); ++e) {
      const std::string c = colour((values[e] - lo) / span);
      os << polygon(f, {pts[grid.elements(e, 0)], pts[grid.elements(e, 1)], pts[grid.elements(e, 2)]}, c, c, 0.3);
    }
    svg.raw(os.str());
    colour_bar(svg, kPanel + 2 * kMargin, lo, hi);
    svg.text(kMargin, 20, title);
    svg.save(path);
    return;
  }
  const std::vector<double> vv = vertex_values_from_elements(grid, values);
  const auto slices = mid_slices(grid.res);
  Svg svg(3 * (kPanel + 2 * kMargin) + 80, kPanel + 2 * kMargin);
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const Slice& sl = slices[s];
    std::vector<std::array<double, 2>> pts;
    for (const auto& c : sl.cells)
      for (int v : c) pts.push_back({map.positions(v, sl.axis_u), map.positions(v, sl.axis_v)});
    const Frame f = frame_for(pts, s * (kPanel + 2 * kMargin), 0);
    std::ostringstream os;
    for (std::size_t c = 0; c < sl.cells.size(); ++c) {
      double mean = 0.0;
      for (int v : sl.cells[c]) mean += vv[v] / 4.0;
      const std::string col = colour((mean - lo) / span);
      os << polygon(f, {pts[4 * c], pts[4 * c + 1], pts[4 * c + 2], pts[4 * c + 3]}, col, col, 0.3);
    }
    svg.raw(os.str());
  }
  colour_bar(svg, 3 * (kPanel + 2 * kMargin), lo, hi);
  svg.text(kMargin, 20, title.empty() ? "mid-plane slices (xy, xz, yz)" : title + " (xy, xz, yz slices)");
  svg.save(path);
}

void plot_density_heatmap(const MapField& map, const ParamField& field, const std::string& path) {
  if (field.kind == FieldKind::Beltrami2d) throw ConfigError("density heatmap needs a density field");
  const std::vector<double> pops = element_populations(*map.grid, field.values);
  const DensityStats stats = element_density(map, pops);
  plot_element_values(map, stats.rho_tilde, path, "normalized density, Std = " + format_number(stats.std_rho_tilde));
}

void plot_mu_magnitude(const MapField& map, const std::string& path) {
  const BeltramiField mu = beltrami_per_element(map);
  plot_element_values(map, mu.modulus(), path, "|mu|");
}

void plot_histogram(const std::vector<double>& values, const std::string& path, const std::string& title, int bins) {
  if (values.empty()) throw ConfigError("histogram of an empty set");
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  const double lo = *std::min_element(values.begin(), values.end());
  const double hi = *std::max_element(values.begin(), values.end());
  // A degenerate range collapses into a single bin at that value.
  const int nb = hi > lo ? bins : 1;
  std::vector<int> counts(nb, 0);
  for (double v : values) {
    const int b = nb == 1 ? 0 : std::min(nb - 1, static_cast<int>((v - lo) / (hi - lo) * nb));
    ++counts[b];
  }
  const int peak = *std::max_element(counts.begin(), counts.end());
  Svg svg(kPanel + 2 * kMargin, kPanel / 2 + 2 * kMargin + 20);
  const double bw = kPanel / nb;
  const double base = kMargin + kPanel / 2;
  std::ostringstream os;
  for (int b = 0; b < nb; ++b) {
    const double h = peak ? counts[b] * (kPanel / 2) / peak : 0.0;
    os << "<rect x=\"" << kMargin + b * bw << "\" y=\"" << base - h << "\" width=\"" << bw * 0.95 << "\" height=\"" << h
       << "\" fill=\"#3b6fb6\" data-count=\"" << counts[b] << "\"/>\n";
  }
  svg.raw(os.str());
  svg.text(kMargin, base + 18, format_number(lo), 11);
  svg.text(kMargin + kPanel - 60, base + 18, format_number(hi), 11);
  svg.text(kMargin, 20, title);
  svg.save(path);
}

std::vector<std::string> plot_dem_vs_deq(const ParamField& field, const MapField& dem, const MapField& deq,
                                         const std::string& out_dir) {
  if (field.kind != FieldKind::Density2d) throw ConfigError("the DEM/DEQ comparison is planar");
  if (dem.grid->num_vertices() != field.num_points() || deq.grid->num_vertices() != field.num_points())
    throw ConfigError("maps and density are on different grids");
  std::filesystem::create_directories(out_dir);
  auto file = [&](const std::string& name) { return (std::filesystem::path(out_dir) / name).string(); };
  const std::vector<double> pops = element_populations(*dem.grid, field.values);
  std::vector<std::string> out{file("a_original_domain.svg"), file("b_dem_mapped.svg"),     file("c_deq_mapped.svg"),
                               file("d_dem_density_hist.svg"), file("e_deq_density_hist.svg"), file("f_dem_mu_hist.svg"),
                               file("g_deq_mu_hist.svg")};
  plot_mapped_grid(identity_map(dem.grid), out[0], "(a) original domain");
  plot_mapped_grid(dem, out[1], "(b) DEM mapped domain");
  plot_mapped_grid(deq, out[2], "(c) DEQ mapped domain");
  plot_histogram(element_density(dem, pops).rho_tilde, out[3], "(d) DEM final density");
  plot_histogram(element_density(deq, pops).rho_tilde, out[4], "(e) DEQ final density");
  plot_histogram(beltrami_per_element(dem).modulus(), out[5], "(f) DEM |mu|");
  plot_histogram(beltrami_per_element(deq).modulus(), out[6], "(g) DEQ |mu|");
  return out;
}

}  // namespace geomap::evalcli
