#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "reldet/model/config.hpp"

namespace reldet::training {

// On-disk layout: <dir>/manifest.json holds the model config, class names and
// the ordered tensor names/shapes; <dir>/weights.bin is every tensor's values
// as little-endian IEEE-754 doubles, concatenated in manifest order.

struct Checkpoint {
  model::ModelConfig config;
  std::vector<std::string> class_names;
  model::ModelParams params;
};

std::string encode_config(const model::ModelConfig& config);
/// Throws ParseError on malformed JSON, ContractError on an invalid config.
model::ModelConfig parse_config(std::string_view text);

void save_checkpoint(const std::filesystem::path& dir, const model::ModelParams& params,
                     const model::ModelConfig& config, const std::vector<std::string>& class_names);

/// Throws IntegrityError when tensor names, order or shapes differ from what
/// the manifest's config implies, or when weights.bin has the wrong length.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace reldet::training
