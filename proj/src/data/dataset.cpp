#include "reldet/data/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "reldet/data/image_io.hpp"
#include "reldet/errors.hpp"

namespace reldet::data {

using json = nlohmann::json;

std::uint64_t scene_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string scene_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05zu", index);
  return buf;
}

Dataset generate_dataset(std::uint64_t seed, std::size_t count, const SceneConfig& config) {
  Dataset ds;
  ds.catalog = config.catalog;
  for (std::size_t i = 0; i < count; ++i) {
    ds.scenes.push_back(generate_scene(scene_seed(seed, i), config));
    ds.names.push_back(scene_stem(i));
  }
  return ds;
}

std::string encode_catalog(const ClassCatalog& catalog) {
  return json{{"classes", catalog.names}}.dump(2) + "\n";
}

ClassCatalog parse_catalog(std::string_view text) {
  try {
    ClassCatalog catalog{json::parse(text.begin(), text.end()).at("classes").get<std::vector<std::string>>()};
    catalog.validate();
    return catalog;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("catalog: ") + e.what(), e.byte ? e.byte - 1 : 0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("catalog: ") + e.what(), 0);
  } catch (const ContractError& e) {
    throw ParseError(std::string("catalog: ") + e.what(), 0);
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  for (std::size_t i = 0; i < dataset.scenes.size(); ++i)
    save_scene(dataset.scenes[i], dataset.catalog, dir, dataset.names[i]);
  write_file(dir / "catalog.json", encode_catalog(dataset.catalog));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("dataset directory '" + dir.string() + "' does not exist");
  Dataset ds;
  ds.catalog = parse_catalog(read_file(dir / "catalog.json"));
  std::vector<std::filesystem::path> annotations;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() == ".json" && p.stem().string().rfind("scene_", 0) == 0)
      annotations.push_back(p);
  }
  std::sort(annotations.begin(), annotations.end());
  for (const auto& p : annotations) {
    ds.scenes.push_back(load_scene(p, ds.catalog));
    ds.names.push_back(p.stem().string());
  }
  return ds;
}

}  // namespace reldet::data
