#include "reldet/matching/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "reldet/errors.hpp"
#include "reldet/numeric/ops.hpp"

namespace reldet::matching {

namespace nm = reldet::numeric;

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols)
    throw DimensionError("cost matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " given " + std::to_string(values_.size()) + " values");
}

CostMatrix CostMatrix::zeros(std::size_t n) { return {n, n, std::vector<double>(n * n, 0.0)}; }

std::vector<GroundTruth> pad_targets(std::span<const GroundTruth> gt, std::size_t n,
                                     std::size_t null_class) {
  if (gt.size() > n)
    throw CapacityError(std::to_string(gt.size()) + " ground-truth objects exceed " +
                        std::to_string(n) + " query slots");
  std::vector<GroundTruth> padded(gt.begin(), gt.end());
  padded.resize(n, GroundTruth{null_class, Box{}});
  return padded;
}

double match_cost(const GroundTruth& target, const Prediction& pred, const LossWeights& weights) {
  if (target.class_id >= pred.null_class()) return 0.0;
  return -pred.class_probs[target.class_id] + geometry::box_loss(target.box, pred.box, weights);
}

CostMatrix build_cost_matrix(std::span<const GroundTruth> targets,
                             std::span<const Prediction> preds, const LossWeights& weights) {
  if (targets.size() != preds.size())
    throw DimensionError("cost matrix needs equal counts, got " + std::to_string(targets.size()) +
                         " targets and " + std::to_string(preds.size()) + " predictions");
  const std::size_t n = targets.size();
  CostMatrix cost = CostMatrix::zeros(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = match_cost(targets[i], preds[j], weights);
  return cost;
}

double assignment_cost(const CostMatrix& cost, std::span<const std::size_t> perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += cost(i, perm[i]);
  return total;
}

namespace {

void require_square_finite(const CostMatrix& cost) {
  if (cost.rows() != cost.cols())
    throw ContractError("assignment needs a square cost matrix, got " +
                        std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()));
  for (std::size_t i = 0; i < cost.rows(); ++i)
    for (std::size_t j = 0; j < cost.cols(); ++j)
      if (!std::isfinite(cost(i, j)))
        throw ContractError("cost matrix entry (" + std::to_string(i) + "," + std::to_string(j) +
                            ") is not finite");
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  require_square_finite(cost);
  const std::size_t n = cost.rows();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual source. row_of[j] is the row
  // currently matched to column j.
  std::vector<double> row_pot(n + 1, 0.0), col_pot(n + 1, 0.0);
  std::vector<std::size_t> row_of(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of[0] = i;
    std::size_t j0 = 0;
    std::vector<double> min_slack(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost(i0 - 1, j - 1) - row_pot[i0] - col_pot[j];
        if (reduced < min_slack[j]) {
          min_slack[j] = reduced;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          row_pot[row_of[j]] += delta;
          col_pot[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment result;
  result.perm.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result.perm[row_of[j] - 1] = j - 1;
  result.total_cost = assignment_cost(cost, result.perm);
  return result;
}

Assignment brute_force_assign(const CostMatrix& cost) {
  require_square_finite(cost);
  const std::size_t n = cost.rows();
  if (n > 9) throw CapacityError("brute-force assignment limited to n <= 9, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best{perm, assignment_cost(cost, perm)};
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double total = assignment_cost(cost, perm);
    if (total < best.total_cost) best = {perm, total};
  }
  return best;
}

LossTerms hungarian_loss(std::span<const GroundTruth> targets, const nm::Tensor& probs,
                         const nm::Tensor& boxes, const Assignment& assignment,
                         const LossWeights& weights, double null_weight) {
  const std::size_t n = targets.size();
  if (probs.rank() != 2 || probs.dim(0) != n || boxes.rank() != 2 || boxes.dim(0) != n ||
      boxes.dim(1) != 4 || assignment.perm.size() != n)
    throw DimensionError("hungarian_loss: " + std::to_string(n) + " targets vs probs " +
                         nm::shape_str(probs.shape()) + ", boxes " + nm::shape_str(boxes.shape()));
  const std::size_t classes = probs.dim(1);
  const std::size_t null_class = classes - 1;

  std::vector<std::size_t> prob_index(n);
  std::vector<double> slot_weight(n);
  std::vector<std::size_t> box_index;
  std::vector<geometry::Box> target_boxes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = assignment.perm[i];
    const std::size_t c = targets[i].class_id;
    if (c >= classes) throw ContractError("target class id out of range");
    prob_index[i] = j * classes + c;
    slot_weight[i] = c == null_class ? null_weight : 1.0;
    if (c != null_class) {
      for (std::size_t q = 0; q < 4; ++q) box_index.push_back(j * 4 + q);
      target_boxes.push_back(targets[i].box);
    }
  }

  const nm::Tensor picked = nm::clamp_min(nm::gather(probs, prob_index), kProbabilityFloor);
  const nm::Tensor cls =
      nm::neg(nm::sum(nm::mul(nm::log(picked), nm::Tensor::vector(std::move(slot_weight)))));

  nm::Tensor box = nm::Tensor::scalar(0.0);
  if (!target_boxes.empty()) {
    const nm::Tensor matched = nm::reshape(nm::gather(boxes, box_index), {target_boxes.size(), 4});
    box = nm::sum(geometry::box_loss(geometry::boxes_to_tensor(target_boxes), matched, weights));
  }
  return {nm::add(cls, box), cls, box};
}

}  // namespace reldet::matching
