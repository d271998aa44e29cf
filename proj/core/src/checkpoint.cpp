#include "s2p2/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace s2p2 {

using nlohmann::json;

json config_to_json(const S2P2Config& cfg) {
  return {{"num_marks", cfg.num_marks},   {"hidden", cfg.hidden},
          {"state", cfg.state},           {"layers", cfg.layers},
          {"mc_points", cfg.mc_points},   {"input_dependent", cfg.input_dependent},
          {"zoh_mode", to_string(cfg.zoh_mode)}, {"seed", cfg.seed}};
}

S2P2Config config_from_json(const json& j) {
  try {
    S2P2Config cfg;
    cfg.num_marks = j.at("num_marks").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.state = j.at("state").get<int>();
    cfg.layers = j.at("layers").get<int>();
    cfg.mc_points = j.value("mc_points", cfg.mc_points);
    cfg.input_dependent = j.value("input_dependent", cfg.input_dependent);
    cfg.zoh_mode = parse_zoh_mode(j.value("zoh_mode", std::string("backward")));
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid model config: ") + e.what());
  }
}

json checkpoint_to_json(const S2P2Model& model) {
  json params = json::array();
  for (const auto& [name, t] : model.named_parameters()) {
    params.push_back({{"name", name},
                      {"shape", {t->rows, t->cols}},
                      {"complex", t->is_complex},
                      {"data", t->data}});
  }
  return {{"format", "s2p2-checkpoint"},
          {"version", kCheckpointVersion},
          {"config", config_to_json(model.config)},
          {"parameters", std::move(params)}};
}

S2P2Model checkpoint_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != "s2p2-checkpoint") {
      throw ValidationError("not an s2p2 checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    S2P2Model model(config_from_json(j.at("config")));
    auto slots = model.named_parameters();
    std::set<std::string> seen;
    for (const auto& entry : j.at("parameters")) {
      const auto name = entry.at("name").get<std::string>();
      auto it = std::find_if(slots.begin(), slots.end(), [&](auto& s) { return s.first == name; });
      if (it == slots.end()) throw ValidationError("unknown parameter " + name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw ValidationError("parameter " + name + " needs a 2-d shape");
      *it->second = ad::Tensor::from(shape[0], shape[1], entry.at("data").get<std::vector<double>>(),
                                     entry.at("complex").get<bool>());
      seen.insert(name);
    }
    if (seen.size() != slots.size()) throw ValidationError("checkpoint is missing parameters");
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ad::ShapeError& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const S2P2Model& model, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << checkpoint_to_json(model).dump() << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

S2P2Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace s2p2
