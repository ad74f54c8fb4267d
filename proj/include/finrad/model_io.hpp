#pragma once

#include <filesystem>

#include <json.hpp>

#include "finrad/net.hpp"

namespace finrad::neural {

nlohmann::json graph_to_json(const GraphSpec& spec);
GraphSpec graph_from_json(const nlohmann::json& j);

/// Binary model format:
///   bytes 0..3   magic "FIN1"
///   u16 LE       format version (currently 1)
///   u32 LE       header length in bytes
///   header       UTF-8 JSON: graph spec, seed, precision, parameter shapes,
///                trainable mask, plus any extra fields (FIN metadata)
///   payload      parameter tensors as IEEE-754 32-bit LE, topological order
///
/// Save/load round-trips are byte-exact.
void save_model(const ModelGraph<float>& m, const std::filesystem::path& path,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
    ModelGraph<float> model;
    nlohmann::json header;
};

LoadedModel load_model(const std::filesystem::path& path);

} // namespace finrad::neural
