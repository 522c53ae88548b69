#pragma once

#include <string>
#include <vector>

#include "reldet/matching/matching.hpp"
#include "reldet/model/config.hpp"
#include "reldet/numeric/tensor.hpp"
#include "reldet/relation/relation.hpp"

// Relation-augmented detection transformer: convolutional backbone, 1×1
// channel reduction, flattened tokens with fixed sinusoidal positions, a
// self-attention encoder, and a two-pass decoder. The first pass produces
// preliminary boxes; a kNN graph over their centers mixes each query's
// embedding with its neighbors' before the refinement pass. Prediction heads
// are shared by both passes.
//
// All functions take parameters either as plain constants (inference) or as
// tape leaves from ModelParams::watch (training); the arithmetic is identical.
namespace reldet::model {

using numeric::Tensor;

/// N predictions with class probabilities over K+1 (last = null) and boxes.
struct DetectionOutput {
  std::vector<matching::Prediction> predictions;
};

struct HeadOutput {
  Tensor probs;  // [N × (K+1)]
  Tensor boxes;  // [N × 4], sigmoid outputs (cx, cy, w, h)

  DetectionOutput to_detections() const;
};

struct DecoderOutput {
  Tensor embeddings;  // [N × d] after refinement
  Tensor prelim_embeddings;
  HeadOutput prelim;
  relation::RelationGraph graph;
};

struct ForwardResult {
  HeadOutput heads;
  DecoderOutput decoder;

  DetectionOutput detections() const { return heads.to_detections(); }
};

/// Three stride-2 3×3 convolution + ReLU stages: [3×H×W] → [C×H/8×W/8].
Tensor backbone_forward(const Tensor& image, const ModelParams& params, const ModelConfig& config);

/// Per-pixel affine map from C to d channels.
Tensor channel_reduce(const Tensor& features, const ModelParams& params);

/// [d×H×W] → [HW×d]; row t is pixel (t / W, t % W).
Tensor flatten_hw(const Tensor& z);
Tensor unflatten_hw(const Tensor& tokens, std::size_t height, std::size_t width);

/// PE(p, 2i) = sin(p / 10000^(2i/d)), PE(p, 2i+1) = cos(same). Odd d is a
/// ContractError.
Tensor sinusoidal_pe(std::size_t num_positions, std::size_t d);

/// Scaled dot-product attention over `num_heads` heads followed by the output
/// projection. `prefix` names the parameter group, e.g. "encoder.0.attn".
Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                            const ModelParams& params, const std::string& prefix,
                            std::size_t num_heads);

Tensor encoder_forward(const Tensor& tokens, const Tensor& pe, const ModelParams& params,
                       const ModelConfig& config);

/// One stack of standard decoder layers `<prefix>.0 .. <prefix>.(layers-1)`.
Tensor decoder_stack(const Tensor& target, const Tensor& query_pos, const Tensor& memory,
                     const Tensor& pe, const ModelParams& params, const std::string& prefix,
                     std::size_t layers, std::size_t num_heads);

/// Pass 1 (the queries are both the initial target and the query positions),
/// relation graph + aggregation over the preliminary boxes, pass 2.
DecoderOutput decoder_forward(const Tensor& memory, const Tensor& queries, const Tensor& pe,
                              const ModelParams& params, const ModelConfig& config);

HeadOutput predict_heads(const Tensor& embeddings, const ModelParams& params);

ForwardResult forward(const Tensor& image, const ModelParams& params, const ModelConfig& config);

}  // namespace reldet::model
