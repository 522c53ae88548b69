#include "reldet/training/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include <json.hpp>

#include "reldet/data/image_io.hpp"
#include "reldet/errors.hpp"

namespace reldet::training {

namespace nm = reldet::numeric;
using json = nlohmann::json;

namespace {

constexpr const char* kFormat = "reldet-checkpoint";
constexpr int kVersion = 1;

json config_json(const model::ModelConfig& c) {
  return {{"image_height", c.image_height},
          {"image_width", c.image_width},
          {"backbone_channels", c.backbone_channels},
          {"model_dim", c.model_dim},
          {"num_heads", c.num_heads},
          {"num_encoder_layers", c.num_encoder_layers},
          {"num_decoder_layers", c.num_decoder_layers},
          {"num_refine_layers", c.num_refine_layers},
          {"ffn_dim", c.ffn_dim},
          {"num_queries", c.num_queries},
          {"num_classes", c.num_classes},
          {"knn_k", c.knn_k},
          {"seed", c.seed}};
}

model::ModelConfig config_from(const json& j) {
  model::ModelConfig c;
  c.image_height = j.at("image_height").get<std::size_t>();
  c.image_width = j.at("image_width").get<std::size_t>();
  c.backbone_channels = j.at("backbone_channels").get<std::size_t>();
  c.model_dim = j.at("model_dim").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.num_encoder_layers = j.at("num_encoder_layers").get<std::size_t>();
  c.num_decoder_layers = j.at("num_decoder_layers").get<std::size_t>();
  c.num_refine_layers = j.at("num_refine_layers").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.num_queries = j.at("num_queries").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.knn_k = j.at("knn_k").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string encode_config(const model::ModelConfig& config) { return config_json(config).dump(2); }

model::ModelConfig parse_config(std::string_view text) {
  try {
    return config_from(json::parse(text.begin(), text.end()));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), e.byte ? e.byte - 1 : 0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
}

void save_checkpoint(const std::filesystem::path& dir, const model::ModelParams& params,
                     const model::ModelConfig& config,
                     const std::vector<std::string>& class_names) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  json tensors = json::array();
  std::string weights;
  weights.reserve(params.total_values() * 8);
  for (const auto& [name, t] : params.entries()) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}});
    for (double v : t.data()) put_le(weights, v);
  }
  const json manifest = {{"format", kFormat},
                         {"version", kVersion},
                         {"config", config_json(config)},
                         {"classes", class_names},
                         {"tensors", std::move(tensors)}};
  data::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  data::write_file(dir / "weights.bin", weights);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::string manifest_text = data::read_file(dir / "manifest.json");
  Checkpoint ck;
  std::vector<std::pair<std::string, nm::Shape>> listed;
  try {
    const json manifest = json::parse(manifest_text);
    if (manifest.at("format").get<std::string>() != kFormat ||
        manifest.at("version").get<int>() != kVersion)
      throw IntegrityError("unsupported checkpoint format in '" + dir.string() + "'");
    ck.config = config_from(manifest.at("config"));
    ck.class_names = manifest.at("classes").get<std::vector<std::string>>();
    for (const auto& t : manifest.at("tensors"))
      listed.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<nm::Shape>());
  } catch (const json::exception& e) {
    throw IntegrityError("checkpoint manifest in '" + dir.string() + "' is malformed: " + e.what());
  } catch (const ContractError& e) {
    throw IntegrityError("checkpoint config in '" + dir.string() + "' is invalid: " + e.what());
  }
  if (ck.class_names.size() != ck.config.num_classes)
    throw IntegrityError("checkpoint lists " + std::to_string(ck.class_names.size()) +
                         " class names for " + std::to_string(ck.config.num_classes) + " classes");

  // The expected layout is whatever init_params builds for this config.
  const model::ModelParams expected = model::init_params(ck.config, 0);
  if (listed.size() != expected.size())
    throw IntegrityError("checkpoint lists " + std::to_string(listed.size()) + " tensors, config needs " +
                         std::to_string(expected.size()));
  for (std::size_t i = 0; i < listed.size(); ++i) {
    const auto& [name, shape] = expected.entries()[i];
    if (listed[i].first != name || listed[i].second != shape.shape())
      throw IntegrityError("checkpoint tensor " + std::to_string(i) + " is '" + listed[i].first +
                           "' " + nm::shape_str(listed[i].second) + ", expected '" + name + "' " +
                           nm::shape_str(shape.shape()));
  }

  const std::string weights = data::read_file(dir / "weights.bin");
  if (weights.size() != expected.total_values() * 8)
    throw IntegrityError("weights.bin has " + std::to_string(weights.size()) + " bytes, expected " +
                         std::to_string(expected.total_values() * 8));
  std::size_t offset = 0;
  for (const auto& [name, shape_src] : expected.entries()) {
    std::vector<double> values(shape_src.numel());
    for (double& v : values) {
      v = get_le(weights.data() + offset);
      offset += 8;
    }
    ck.params.add(name, nm::Tensor(shape_src.shape(), std::move(values)));
  }
  return ck;
}

}  // namespace reldet::training
