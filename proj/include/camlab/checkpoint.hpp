#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "camlab/model.hpp"

namespace camlab {

/// Free-form string metadata stored next to the weights (training recipe,
/// seed, dataset description, ...).
using Metadata = std::map<std::string, std::string>;

struct Checkpoint {
  Model model;
  Metadata metadata;
};

/// Binary layout: "CAMLAB1" magic, u32 version, u64 header length, a JSON
/// header with the model config, metadata and a tensor directory, then
/// little-endian float64 payloads in directory order.
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Metadata& metadata = {});
/// Throws FormatError on a bad magic, version, header or truncated payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

}  // namespace camlab
