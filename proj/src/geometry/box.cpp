#include "reldet/geometry/box.hpp"

#include <algorithm>
#include <cmath>

#include "reldet/errors.hpp"
#include "reldet/numeric/ops.hpp"

namespace reldet::geometry {

namespace nm = reldet::numeric;

void LossWeights::validate() const {
  const bool finite = std::isfinite(lambda_iou) && std::isfinite(lambda_l1);
  if (!finite || lambda_iou < 0.0 || lambda_l1 < 0.0 || (lambda_iou == 0.0 && lambda_l1 == 0.0))
    throw ContractError("loss weights must be finite, nonnegative, and not both zero");
}

bool is_valid(const Box& b) {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) && std::isfinite(b.h) &&
         b.w >= 0.0 && b.h >= 0.0;
}

Corners to_corners(const Box& b) {
  return {b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h};
}

Box from_corners(const Corners& c) {
  return {0.5 * (c.x1 + c.x2), 0.5 * (c.y1 + c.y2), c.x2 - c.x1, c.y2 - c.y1};
}

double area(const Corners& c) {
  return std::max(0.0, c.x2 - c.x1) * std::max(0.0, c.y2 - c.y1);
}

namespace {

struct Overlap {
  double inter;
  double uni;
  double enclosing;
};

Overlap overlap(const Corners& a, const Corners& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = area(a) + area(b) - inter;
  const double ew = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double eh = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  return {inter, uni, ew * eh};
}

}  // namespace

double iou(const Corners& a, const Corners& b) {
  const Overlap o = overlap(a, b);
  return o.uni > 0.0 ? o.inter / o.uni : 0.0;
}

double giou(const Corners& a, const Corners& b) {
  const Overlap o = overlap(a, b);
  if (o.enclosing <= 0.0) return a == b ? 1.0 : 0.0;
  const double base = o.uni > 0.0 ? o.inter / o.uni : 0.0;
  return base - std::max(0.0, o.enclosing - o.uni) / o.enclosing;
}

double box_loss(const Box& target, const Box& pred, const LossWeights& weights) {
  const double l1 = std::abs(target.cx - pred.cx) + std::abs(target.cy - pred.cy) +
                    std::abs(target.w - pred.w) + std::abs(target.h - pred.h);
  return weights.lambda_iou * (1.0 - giou(target, pred)) + weights.lambda_l1 * l1;
}

namespace {

struct CornerColumns {
  nm::Tensor x1, y1, x2, y2;
};

CornerColumns corner_columns(const nm::Tensor& boxes) {
  if (boxes.rank() != 2 || boxes.dim(1) != 4)
    throw DimensionError("expected [M x 4] boxes, got " + nm::shape_str(boxes.shape()));
  const std::size_t m = boxes.dim(0);
  const auto col = [&](std::size_t c) { return nm::reshape(nm::slice(boxes, 1, c, c + 1), {m}); };
  const nm::Tensor cx = col(0), cy = col(1);
  const nm::Tensor hw = nm::scale(col(2), 0.5), hh = nm::scale(col(3), 0.5);
  return {nm::sub(cx, hw), nm::sub(cy, hh), nm::add(cx, hw), nm::add(cy, hh)};
}

}  // namespace

nm::Tensor giou(const nm::Tensor& a, const nm::Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("giou: shapes " + nm::shape_str(a.shape()) + " and " +
                         nm::shape_str(b.shape()) + " differ");
  const CornerColumns ca = corner_columns(a);
  const CornerColumns cb = corner_columns(b);
  const auto extent = [](const nm::Tensor& lo, const nm::Tensor& hi) {
    return nm::relu(nm::sub(hi, lo));
  };
  const nm::Tensor area_a = nm::mul(extent(ca.x1, ca.x2), extent(ca.y1, ca.y2));
  const nm::Tensor area_b = nm::mul(extent(cb.x1, cb.x2), extent(cb.y1, cb.y2));
  const nm::Tensor inter =
      nm::mul(extent(nm::maximum(ca.x1, cb.x1), nm::minimum(ca.x2, cb.x2)),
              extent(nm::maximum(ca.y1, cb.y1), nm::minimum(ca.y2, cb.y2)));
  const nm::Tensor uni = nm::sub(nm::add(area_a, area_b), inter);
  const nm::Tensor enclosing =
      nm::mul(nm::sub(nm::maximum(ca.x2, cb.x2), nm::minimum(ca.x1, cb.x1)),
              nm::sub(nm::maximum(ca.y2, cb.y2), nm::minimum(ca.y1, cb.y1)));
  return nm::sub(nm::safe_div(inter, uni), nm::safe_div(nm::clamp_min(nm::sub(enclosing, uni), 0.0), enclosing));
}

nm::Tensor box_loss(const nm::Tensor& targets, const nm::Tensor& preds,
                    const LossWeights& weights) {
  const nm::Tensor giou_term = nm::scale(nm::add_scalar(nm::neg(giou(targets, preds)), 1.0),
                                         weights.lambda_iou);
  const std::size_t m = targets.dim(0);
  const nm::Tensor l1_rows =
      nm::matmul(nm::abs(nm::sub(targets, preds)), nm::Tensor::full({4, 1}, 1.0));
  return nm::add(giou_term, nm::scale(nm::reshape(l1_rows, {m}), weights.lambda_l1));
}

nm::Tensor boxes_to_tensor(const std::vector<Box>& boxes) {
  std::vector<double> data;
  data.reserve(boxes.size() * 4);
  for (const Box& b : boxes) data.insert(data.end(), {b.cx, b.cy, b.w, b.h});
  return nm::Tensor({boxes.size(), 4}, std::move(data));
}

}  // namespace reldet::geometry
