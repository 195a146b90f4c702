#include "geomap/evalcli.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace geomap::evalcli {

namespace {

static_assert(std::endian::native == std::endian::little, "binary field files assume a little-endian host");

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::pair<nlohmann::json, std::ifstream> open_in(const std::string& path, const std::string& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + " is empty");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + " does not start with a JSON header line");
  }
  if (header.value("magic", std::string()) != magic) throw ConfigError(path + " is not a " + magic + " file");
  return {header, std::move(in)};
}

void read_doubles(std::ifstream& in, double* out, std::size_t n, const std::string& path) {
  in.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double)) throw ConfigError(path + " is truncated");
  char extra;
  if (in.read(&extra, 1)) throw ConfigError(path + " has trailing bytes");
}

}  // namespace

void write_field(const std::string& path, const ParamField& field) {
  field.validate();
  nlohmann::json header = {{"magic", "GFD1"},          {"dim", field.dim},         {"res", field.res},
                           {"channels", field.channels}, {"kind", to_string(field.kind)}, {"seed", field.seed},
                           {"spec", field.spec}};
  auto out = open_out(path);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(field.values.data()),
            static_cast<std::streamsize>(field.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed for " + path);
}

ParamField read_field(const std::string& path) {
  auto [header, in] = open_in(path, "GFD1");
  ParamField f;
  try {
    f.dim = header.at("dim").get<int>();
    f.res = header.at("res").get<std::vector<int>>();
    f.channels = header.at("channels").get<int>();
    f.kind = field_kind_from_string(header.at("kind").get<std::string>());
    f.seed = header.value("seed", std::uint64_t{0});
    f.spec = header.value("spec", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": malformed header: " + e.what());
  }
  if (static_cast<int>(f.res.size()) != f.dim) throw ConfigError(path + ": res must list one size per axis");
  for (int r : f.res)
    if (r < 2) throw ConfigError(path + ": resolution must be >= 2");
  for (int r : f.res)
    if (r != f.res.front()) throw ConfigError(path + ": only isotropic grids are supported");
  f.coords = regular_coords(f.res.front(), f.dim);
  f.values.resize(static_cast<std::size_t>(f.channels) * f.num_points());
  read_doubles(in, f.values.data(), f.values.size(), path);
  f.validate();
  // Reattach the closed form when the spec regenerates exactly these samples.
  try {
    if (f.spec.contains("synth") || f.spec.contains("test_id")) {
      ParamField again = resynthesize(f.spec, f.res.front());
      if (again.values == f.values) f.function = again.function;
    }
  } catch (const std::exception&) {
    f.function.reset();
  }
  return f;
}

void write_map(const std::string& path, const MapField& map) {
  nlohmann::json header = {{"magic", "GMP1"},
                           {"dim", map.dim()},
                           {"res", map.grid->res},
                           {"boundary_kind", to_string(map.boundary_kind)},
                           {"provenance", to_string(map.provenance)}};
  if (!map.alpha.empty()) header["alpha"] = map.alpha;
  auto out = open_out(path);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(map.positions.data()),
            static_cast<std::streamsize>(map.positions.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed for " + path);
}

MapField read_map(const std::string& path) {
  auto [header, in] = open_in(path, "GMP1");
  MapField map;
  int dim = 0, res = 0;
  try {
    dim = header.at("dim").get<int>();
    res = header.at("res").get<int>();
    map.boundary_kind = boundary_kind_from_string(header.at("boundary_kind").get<std::string>());
    map.provenance = provenance_from_string(header.at("provenance").get<std::string>());
    if (header.contains("alpha")) map.alpha = header["alpha"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": malformed header: " + e.what());
  }
  auto grid = std::make_shared<const SimplicialGrid>(build_grid(res, dim));
  map.positions.resize(grid->num_vertices(), dim);
  read_doubles(in, map.positions.data(), static_cast<std::size_t>(map.positions.size()), path);
  map.grid = std::move(grid);
  return map;
}

}  // namespace geomap::evalcli
