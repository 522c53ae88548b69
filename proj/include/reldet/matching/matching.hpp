#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "reldet/geometry/box.hpp"
#include "reldet/numeric/tensor.hpp"

namespace reldet::matching {

using geometry::Box;
using geometry::LossWeights;

inline constexpr double kDefaultNullWeight = 0.1;
/// Probabilities are clamped to this floor before the log in the loss.
inline constexpr double kProbabilityFloor = 1e-12;

/// Labeled object. `class_id == null_class` marks a padded "no object" slot.
struct GroundTruth {
  std::size_t class_id = 0;
  Box box;
};

/// Class distribution over K real classes plus the trailing null class.
struct Prediction {
  std::vector<double> class_probs;
  Box box;

  std::size_t null_class() const { return class_probs.size() - 1; }
};

/// perm[i] is the prediction assigned to ground-truth slot i.
struct Assignment {
  std::vector<std::size_t> perm;
  double total_cost = 0.0;
};

class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static CostMatrix zeros(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Appends null-class slots with a zero box until there are n targets.
/// Throws CapacityError when gt.size() > n.
std::vector<GroundTruth> pad_targets(std::span<const GroundTruth> gt, std::size_t n,
                                     std::size_t null_class);

/// −p̂(c) + box_loss(b, b̂) for a real target; 0 for a null slot. Uses the raw
/// probability, not its log.
double match_cost(const GroundTruth& target, const Prediction& pred, const LossWeights& weights);

/// Row i is target i, column j is prediction j.
CostMatrix build_cost_matrix(std::span<const GroundTruth> targets,
                             std::span<const Prediction> preds, const LossWeights& weights);

/// Σ_i C(i, perm[i]), summed in row order.
double assignment_cost(const CostMatrix& cost, std::span<const std::size_t> perm);

/// Minimum-cost perfect assignment (shortest augmenting path with dual
/// potentials, O(n³)). Throws ContractError for non-square or non-finite input.
Assignment hungarian(const CostMatrix& cost);

/// Exhaustive search over all n! permutations; CapacityError for n > 9.
Assignment brute_force_assign(const CostMatrix& cost);

struct LossTerms {
  numeric::Tensor total;
  numeric::Tensor classification;
  numeric::Tensor box;
};

/// Σ_i [ w_i · −log p̂_σ(i)(c_i) + 1{c_i ≠ ∅} · box_loss(b_i, b̂_σ(i)) ] where
/// w_i = null_weight on null slots and 1 otherwise. `probs` is [N×(K+1)] and
/// `boxes` [N×4]; the assignment is treated as a constant.
LossTerms hungarian_loss(std::span<const GroundTruth> targets, const numeric::Tensor& probs,
                         const numeric::Tensor& boxes, const Assignment& assignment,
                         const LossWeights& weights, double null_weight = kDefaultNullWeight);

}  // namespace reldet::matching
