#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "reldet/numeric/tensor.hpp"

namespace reldet::model {

struct ModelConfig {
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  std::size_t backbone_channels = 16;
  std::size_t model_dim = 32;
  std::size_t num_heads = 4;
  std::size_t num_encoder_layers = 2;
  /// Decoder layers before the relation step.
  std::size_t num_decoder_layers = 2;
  /// Decoder layers after the relation step.
  std::size_t num_refine_layers = 1;
  std::size_t ffn_dim = 128;
  std::size_t num_queries = 16;
  /// Real classes; the null class is index num_classes.
  std::size_t num_classes = 5;
  std::size_t knn_k = 3;
  std::uint64_t seed = 0;

  std::size_t feature_height() const { return image_height / 8; }
  std::size_t feature_width() const { return image_width / 8; }
  std::size_t num_tokens() const { return feature_height() * feature_width(); }
  std::size_t null_class() const { return num_classes; }

  /// Throws ContractError describing the first violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named parameter tensors in a fixed, deterministic order.
class ModelParams {
 public:
  using Entry = std::pair<std::string, numeric::Tensor>;

  void add(std::string name, numeric::Tensor value);
  bool contains(std::string_view name) const;
  /// Throws ContractError for unknown names.
  const numeric::Tensor& get(std::string_view name) const;
  numeric::Tensor& get(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  /// Copy whose tensors are leaves on `tape`.
  ModelParams watch(numeric::Tape& tape) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Deterministic from seed: affine and convolution weights uniform in
/// ±1/sqrt(fan_in), biases zero, query embeddings N(0,1)·0.02.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

}  // namespace reldet::model
