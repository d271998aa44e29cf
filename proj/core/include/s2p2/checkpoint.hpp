#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "s2p2/model.hpp"

namespace s2p2 {

inline constexpr int kCheckpointVersion = 1;

/// {"format": "s2p2-checkpoint", "version": 1, "config": {...},
///  "parameters": [{"name", "shape": [r, c], "complex", "data"}]}
/// Complex data is interleaved (re, im).
nlohmann::json config_to_json(const S2P2Config& cfg);
S2P2Config config_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const S2P2Model& model);
/// Throws ValidationError on a wrong format, version, or parameter set.
S2P2Model checkpoint_from_json(const nlohmann::json& j);

/// Written to a temporary file and renamed into place.
void save_checkpoint(const S2P2Model& model, const std::filesystem::path& path);
S2P2Model load_checkpoint(const std::filesystem::path& path);

}  // namespace s2p2
