#include "reldet/model/config.hpp"

#include <cmath>
#include <string>

#include "reldet/errors.hpp"
#include "reldet/random.hpp"

namespace reldet::model {

namespace nm = reldet::numeric;

void ModelConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ContractError("model config: " + msg); };
  if (image_height == 0 || image_width == 0 || image_height % 8 || image_width % 8)
    fail("image size must be a positive multiple of 8");
  if (backbone_channels == 0) fail("backbone_channels must be positive");
  if (model_dim == 0 || model_dim % 2) fail("model_dim must be positive and even");
  if (num_heads == 0 || model_dim % num_heads) fail("model_dim must be divisible by num_heads");
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (num_queries == 0) fail("num_queries must be at least 1");
  if (num_classes == 0) fail("num_classes must be at least 1");
}

void ModelParams::add(std::string name, nm::Tensor value) {
  if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ModelParams::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

const nm::Tensor& ModelParams::get(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].second;
}

nm::Tensor& ModelParams::get(std::string_view name) {
  return const_cast<nm::Tensor&>(std::as_const(*this).get(name));
}

std::size_t ModelParams::total_values() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

ModelParams ModelParams::watch(nm::Tape& tape) const {
  ModelParams out;
  for (const auto& [name, t] : entries_) out.add(name, tape.watch(t));
  return out;
}

namespace {

class Initializer {
 public:
  Initializer(ModelParams& params, std::uint64_t seed) : params_(params), rng_(seed) {}

  void uniform(const std::string& name, nm::Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(nm::shape_numel(shape));
    for (double& x : v) x = rng_.uniform(-bound, bound);
    params_.add(name, nm::Tensor(std::move(shape), std::move(v)));
  }

  void zeros(const std::string& name, nm::Shape shape) {
    params_.add(name, nm::Tensor::zeros(std::move(shape)));
  }

  void normal(const std::string& name, nm::Shape shape, double stddev) {
    std::vector<double> v(nm::shape_numel(shape));
    for (double& x : v) x = stddev * rng_.normal();
    params_.add(name, nm::Tensor(std::move(shape), std::move(v)));
  }

  // Weight stored [in × out] so that y = x·W + b.
  void linear(const std::string& prefix, std::size_t in, std::size_t out) {
    uniform(prefix + ".weight", {in, out}, in);
    zeros(prefix + ".bias", {out});
  }

  void attention(const std::string& prefix, std::size_t d) {
    for (const char* proj : {"q", "k", "v", "o"}) linear(prefix + "." + proj, d, d);
  }

  void ffn(const std::string& prefix, std::size_t d, std::size_t hidden) {
    linear(prefix + ".1", d, hidden);
    linear(prefix + ".2", hidden, d);
  }

  void decoder_layers(const std::string& prefix, std::size_t layers, std::size_t d,
                      std::size_t hidden) {
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string p = prefix + "." + std::to_string(l);
      attention(p + ".self_attn", d);
      attention(p + ".cross_attn", d);
      ffn(p + ".ffn", d, hidden);
    }
  }

 private:
  ModelParams& params_;
  Rng rng_;
};

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params;
  Initializer init(params, seed);
  const std::size_t c = config.backbone_channels;
  const std::size_t d = config.model_dim;
  const std::size_t hidden = config.ffn_dim;

  std::size_t in_channels = 3;
  for (int stage = 1; stage <= 3; ++stage) {
    const std::string p = "backbone.conv" + std::to_string(stage);
    init.uniform(p + ".weight", {c, in_channels, 3, 3}, in_channels * 9);
    init.zeros(p + ".bias", {c});
    in_channels = c;
  }
  init.uniform("reduce.weight", {d, c}, c);
  init.zeros("reduce.bias", {d});

  for (std::size_t l = 0; l < config.num_encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    init.attention(p + ".attn", d);
    init.ffn(p + ".ffn", d, hidden);
  }
  init.normal("query_embed", {config.num_queries, d}, 0.02);
  init.decoder_layers("decoder", config.num_decoder_layers, d, hidden);
  init.uniform("relation.weight", {d, 2 * d}, 2 * d);
  init.zeros("relation.bias", {d});
  init.decoder_layers("refine", config.num_refine_layers, d, hidden);

  init.linear("head.box.1", d, d);
  init.linear("head.box.2", d, d);
  init.linear("head.box.3", d, 4);
  init.linear("head.class", d, config.num_classes + 1);
  return params;
}

}  // namespace reldet::model
