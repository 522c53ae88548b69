#pragma once

#include "reldet/numeric/tensor.hpp"

namespace reldet::geometry {

/// Axis-aligned box in normalized center format.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const Box&, const Box&) = default;
};

struct Corners {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  friend bool operator==(const Corners&, const Corners&) = default;
};

/// Weights of the GIoU and L1 terms in the box loss.
struct LossWeights {
  double lambda_iou = 2.0;
  double lambda_l1 = 5.0;

  /// Throws ContractError unless both weights are finite, nonnegative and at
  /// least one is positive.
  void validate() const;
};

bool is_valid(const Box& b);

Corners to_corners(const Box& b);
Box from_corners(const Corners& c);
double area(const Corners& c);

// IoU is 0 when the union has zero area. GIoU subtracts the fraction of the
// enclosing box not covered by the union; if the enclosing box is itself
// degenerate, GIoU is 1 for coinciding boxes and 0 otherwise.
double iou(const Corners& a, const Corners& b);
double giou(const Corners& a, const Corners& b);
inline double iou(const Box& a, const Box& b) { return iou(to_corners(a), to_corners(b)); }
inline double giou(const Box& a, const Box& b) { return giou(to_corners(a), to_corners(b)); }

/// lambda_iou · (1 − GIoU) + lambda_l1 · ‖target − pred‖₁ over (cx, cy, w, h).
double box_loss(const Box& target, const Box& pred, const LossWeights& weights);

/// Row-wise GIoU of two [M×4] center-format tensors, giving [M]. Rows whose
/// enclosing box has zero area contribute 0 in place of the scalar rule.
numeric::Tensor giou(const numeric::Tensor& a, const numeric::Tensor& b);

/// Row-wise box loss of [M×4] tensors, giving [M]; differentiable in both.
numeric::Tensor box_loss(const numeric::Tensor& targets, const numeric::Tensor& preds,
                         const LossWeights& weights);

numeric::Tensor boxes_to_tensor(const std::vector<Box>& boxes);

}  // namespace reldet::geometry
