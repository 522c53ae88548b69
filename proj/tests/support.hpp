#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "reldet/numeric/tensor.hpp"
#include "reldet/random.hpp"

namespace reldet::test {

inline numeric::Tensor random_tensor(const numeric::Shape& shape, Rng& rng, double lo = -1.0,
                                     double hi = 1.0) {
  std::vector<double> v(numeric::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return numeric::Tensor(shape, std::move(v));
}

inline double max_abs_diff(const numeric::Tensor& a, const numeric::Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline std::vector<double> values(const numeric::Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

}  // namespace reldet::test

namespace reldet::test {

// Recomputes all-point interpolated AP straight from the precision/recall
// table: for the k-th true positive, the interpolated precision is the best
// precision at any cut whose recall is at least k / num_gt.
inline double brute_force_ap(const std::vector<bool>& flags, std::size_t num_gt) {
  const std::size_t n = flags.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t j = 0; j < n; ++j) {
    tp += flags[j] ? 1 : 0;
    precision[j] = static_cast<double>(tp) / static_cast<double>(j + 1);
    recall[j] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  double total = 0.0;
  for (std::size_t k = 1; k <= tp; ++k) {
    const double level = static_cast<double>(k) / static_cast<double>(num_gt);
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (recall[j] >= level) best = std::max(best, precision[j]);
    total += best;
  }
  return total / static_cast<double>(num_gt);
}

}  // namespace reldet::test
