#include "reldet/model/model.hpp"

#include <cmath>
#include <string>

#include "reldet/errors.hpp"
#include "reldet/numeric/ops.hpp"

namespace reldet::model {

namespace nm = reldet::numeric;

namespace {

Tensor linear(const Tensor& x, const ModelParams& params, const std::string& prefix) {
  return nm::add_bias(nm::matmul(x, params.get(prefix + ".weight")), params.get(prefix + ".bias"));
}

Tensor feed_forward(const Tensor& x, const ModelParams& params, const std::string& prefix) {
  return linear(nm::relu(linear(x, params, prefix + ".1")), params, prefix + ".2");
}

void require_width(const char* what, const Tensor& t, std::size_t d) {
  if (t.rank() != 2 || t.dim(1) != d)
    throw DimensionError(std::string(what) + ": expected [? x " + std::to_string(d) + "], got " +
                         nm::shape_str(t.shape()));
}

}  // namespace

DetectionOutput HeadOutput::to_detections() const {
  DetectionOutput out;
  const std::size_t n = probs.dim(0);
  const std::size_t classes = probs.dim(1);
  out.predictions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    matching::Prediction p;
    p.class_probs.assign(probs.data().begin() + i * classes,
                         probs.data().begin() + (i + 1) * classes);
    p.box = {boxes.at(i, 0), boxes.at(i, 1), boxes.at(i, 2), boxes.at(i, 3)};
    out.predictions.push_back(std::move(p));
  }
  return out;
}

Tensor backbone_forward(const Tensor& image, const ModelParams& params,
                        const ModelConfig& config) {
  const nm::Shape expected{3, config.image_height, config.image_width};
  if (image.shape() != expected)
    throw DimensionError("backbone: image " + nm::shape_str(image.shape()) + ", expected " +
                         nm::shape_str(expected));
  Tensor x = image;
  for (int stage = 1; stage <= 3; ++stage) {
    const std::string p = "backbone.conv" + std::to_string(stage);
    x = nm::relu(nm::conv2d(x, params.get(p + ".weight"), params.get(p + ".bias"), 2, 1));
  }
  return x;
}

Tensor channel_reduce(const Tensor& features, const ModelParams& params) {
  const Tensor& weight = params.get("reduce.weight");
  if (features.rank() != 3 || features.dim(0) != weight.dim(1))
    throw DimensionError("channel_reduce: features " + nm::shape_str(features.shape()) +
                         " vs weight " + nm::shape_str(weight.shape()));
  const std::size_t h = features.dim(1);
  const std::size_t w = features.dim(2);
  const Tensor flat = nm::reshape(features, {features.dim(0), h * w});
  const Tensor mixed = nm::add_channel_bias(nm::matmul(weight, flat), params.get("reduce.bias"));
  return nm::reshape(mixed, {weight.dim(0), h, w});
}

Tensor flatten_hw(const Tensor& z) {
  if (z.rank() != 3) throw DimensionError("flatten_hw: expected [d x H x W], got " +
                                          nm::shape_str(z.shape()));
  return nm::transpose(nm::reshape(z, {z.dim(0), z.dim(1) * z.dim(2)}));
}

Tensor unflatten_hw(const Tensor& tokens, std::size_t height, std::size_t width) {
  if (tokens.rank() != 2 || tokens.dim(0) != height * width)
    throw DimensionError("unflatten_hw: tokens " + nm::shape_str(tokens.shape()) + " for " +
                         std::to_string(height) + "x" + std::to_string(width));
  return nm::reshape(nm::transpose(tokens), {tokens.dim(1), height, width});
}

Tensor sinusoidal_pe(std::size_t num_positions, std::size_t d) {
  if (d == 0 || d % 2) throw ContractError("sinusoidal_pe: width must be positive and even");
  std::vector<double> pe(num_positions * d);
  for (std::size_t pos = 0; pos < num_positions; ++pos) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) / freq;
      pe[pos * d + 2 * i] = std::sin(angle);
      pe[pos * d + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor({num_positions, d}, std::move(pe));
}

Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                            const ModelParams& params, const std::string& prefix,
                            std::size_t num_heads) {
  const std::size_t d = params.get(prefix + ".q.weight").dim(0);
  require_width("attention query", query, d);
  require_width("attention key", key, d);
  require_width("attention value", value, d);
  if (key.dim(0) != value.dim(0))
    throw DimensionError("attention: " + std::to_string(key.dim(0)) + " keys but " +
                         std::to_string(value.dim(0)) + " values");
  if (num_heads == 0 || d % num_heads)
    throw ContractError("attention: width " + std::to_string(d) + " not divisible by " +
                        std::to_string(num_heads) + " heads");
  const std::size_t dh = d / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor q = linear(query, params, prefix + ".q");
  const Tensor k = linear(key, params, prefix + ".k");
  const Tensor v = linear(value, params, prefix + ".v");
  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Tensor qh = nm::slice(q, 1, h * dh, (h + 1) * dh);
    const Tensor kh = nm::slice(k, 1, h * dh, (h + 1) * dh);
    const Tensor vh = nm::slice(v, 1, h * dh, (h + 1) * dh);
    const Tensor scores = nm::scale(nm::matmul(qh, nm::transpose(kh)), inv_sqrt);
    heads.push_back(nm::matmul(nm::softmax(scores, 1), vh));
  }
  const Tensor joined = num_heads == 1 ? heads[0] : nm::concat(heads, 1);
  return linear(joined, params, prefix + ".o");
}

Tensor encoder_forward(const Tensor& tokens, const Tensor& pe, const ModelParams& params,
                       const ModelConfig& config) {
  if (tokens.shape() != pe.shape())
    throw DimensionError("encoder: tokens " + nm::shape_str(tokens.shape()) + " vs positions " +
                         nm::shape_str(pe.shape()));
  Tensor x = tokens;
  for (std::size_t l = 0; l < config.num_encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    const Tensor qk = nm::add(x, pe);
    x = nm::layer_norm(nm::add(x, multi_head_attention(qk, qk, x, params, p + ".attn",
                                                       config.num_heads)));
    x = nm::layer_norm(nm::add(x, feed_forward(x, params, p + ".ffn")));
  }
  return x;
}

Tensor decoder_stack(const Tensor& target, const Tensor& query_pos, const Tensor& memory,
                     const Tensor& pe, const ModelParams& params, const std::string& prefix,
                     std::size_t layers, std::size_t num_heads) {
  if (target.shape() != query_pos.shape() || memory.shape() != pe.shape())
    throw DimensionError("decoder: target " + nm::shape_str(target.shape()) + ", queries " +
                         nm::shape_str(query_pos.shape()) + ", memory " +
                         nm::shape_str(memory.shape()) + ", positions " +
                         nm::shape_str(pe.shape()));
  const Tensor keys = nm::add(memory, pe);
  Tensor x = target;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = prefix + "." + std::to_string(l);
    Tensor qk = nm::add(x, query_pos);
    x = nm::layer_norm(
        nm::add(x, multi_head_attention(qk, qk, x, params, p + ".self_attn", num_heads)));
    x = nm::layer_norm(nm::add(x, multi_head_attention(nm::add(x, query_pos), keys, memory, params,
                                                       p + ".cross_attn", num_heads)));
    x = nm::layer_norm(nm::add(x, feed_forward(x, params, p + ".ffn")));
  }
  return x;
}

HeadOutput predict_heads(const Tensor& embeddings, const ModelParams& params) {
  require_width("heads", embeddings, params.get("head.class.weight").dim(0));
  Tensor h = nm::relu(linear(embeddings, params, "head.box.1"));
  h = nm::relu(linear(h, params, "head.box.2"));
  HeadOutput out;
  out.boxes = nm::sigmoid(linear(h, params, "head.box.3"));
  out.probs = nm::softmax(linear(embeddings, params, "head.class"), 1);
  return out;
}

DecoderOutput decoder_forward(const Tensor& memory, const Tensor& queries, const Tensor& pe,
                              const ModelParams& params, const ModelConfig& config) {
  require_width("decoder queries", queries, config.model_dim);
  DecoderOutput out;
  out.prelim_embeddings = decoder_stack(queries, queries, memory, pe, params, "decoder",
                                        config.num_decoder_layers, config.num_heads);
  out.prelim = predict_heads(out.prelim_embeddings, params);

  const std::size_t n = queries.dim(0);
  std::vector<relation::Point> centers(n);
  for (std::size_t i = 0; i < n; ++i)
    centers[i] = {out.prelim.boxes.at(i, 0), out.prelim.boxes.at(i, 1)};
  out.graph = relation::build_knn_graph(centers, config.knn_k);

  const Tensor related = relation::aggregate(
      out.prelim_embeddings, out.graph,
      {params.get("relation.weight"), params.get("relation.bias")});
  out.embeddings = decoder_stack(related, queries, memory, pe, params, "refine",
                                 config.num_refine_layers, config.num_heads);
  return out;
}

ForwardResult forward(const Tensor& image, const ModelParams& params, const ModelConfig& config) {
  const Tensor features = backbone_forward(image, params, config);
  const Tensor tokens = flatten_hw(channel_reduce(features, params));
  const Tensor pe = sinusoidal_pe(tokens.dim(0), config.model_dim);
  const Tensor memory = encoder_forward(tokens, pe, params, config);
  ForwardResult result;
  result.decoder = decoder_forward(memory, params.get("query_embed"), pe, params, config);
  result.heads = predict_heads(result.decoder.embeddings, params);
  return result;
}

}  // namespace reldet::model
