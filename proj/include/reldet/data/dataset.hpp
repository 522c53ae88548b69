#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reldet/data/scene.hpp"

namespace reldet::data {

/// Scenes loaded from a dataset directory, in file-name order.
struct Dataset {
  ClassCatalog catalog;
  std::vector<Scene> scenes;
  std::vector<std::string> names;  // stem of each scene, e.g. "scene_00003"
};

/// Seed of scene `index` in a dataset generated from `seed`.
std::uint64_t scene_seed(std::uint64_t seed, std::size_t index);

/// "scene_%05d"
std::string scene_stem(std::size_t index);

Dataset generate_dataset(std::uint64_t seed, std::size_t count, const SceneConfig& config);

/// Writes scene_%05d.{ppm,json} for every scene plus catalog.json; creates
/// `dir` if needed.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

std::string encode_catalog(const ClassCatalog& catalog);
ClassCatalog parse_catalog(std::string_view text);

/// Throws IoError for a missing directory or catalog, ParseError for bad files.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace reldet::data
