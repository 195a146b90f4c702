#include "geomap/surrogate.hpp"

#include <filesystem>
#include <fstream>

namespace geomap::surrogate {

namespace fs = std::filesystem;

void save_checkpoint(const std::string& dir, MultiResUNet& model, const nlohmann::json& manifest) {
  fs::create_directories(dir);
  const SurrogateConfig& config = model->config();
  const std::uint64_t hash = config_hash(config);
  nlohmann::json j = {{"surrogate", config}, {"config_hash", hash}, {"manifest", manifest}};
  {
    std::ofstream out(fs::path(dir) / "config.json");
    if (!out) throw std::runtime_error("cannot write " + (fs::path(dir) / "config.json").string());
    out << j.dump(2) << "\n";
  }
  torch::serialize::OutputArchive archive;
  model->save(archive);
  archive.write("config_hash", torch::tensor(static_cast<std::int64_t>(hash), torch::kInt64));
  archive.save_to((fs::path(dir) / "weights.pt").string());
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path config_path = fs::path(dir) / "config.json";
  std::ifstream in(config_path);
  if (!in) throw ConfigError("checkpoint config not found: " + config_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint config: " + std::string(e.what()));
  }
  Checkpoint ck;
  ck.config = j.at("surrogate").get<SurrogateConfig>();
  ck.manifest = j.value("manifest", nlohmann::json::object());
  const std::uint64_t expected = config_hash(ck.config);
  if (j.at("config_hash").get<std::uint64_t>() != expected)
    throw ConfigError("checkpoint config hash does not match its contents");

  ck.model = MultiResUNet(ck.config);
  torch::serialize::InputArchive archive;
  try {
    archive.load_from((fs::path(dir) / "weights.pt").string());
  } catch (const c10::Error& e) {
    throw ConfigError("cannot read checkpoint weights in " + dir);
  }
  torch::Tensor stored;
  archive.read("config_hash", stored);
  if (static_cast<std::uint64_t>(stored.item<std::int64_t>()) != expected)
    throw ConfigError("weights were saved for a different configuration");
  ck.model->load(archive);
  const auto dtype = ck.model->parameters().front().scalar_type();
  ck.model->to(dtype);
  ck.model->eval();
  return ck;
}

}  // namespace geomap::surrogate
