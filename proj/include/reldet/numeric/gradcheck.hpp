#pragma once

#include <functional>

#include "reldet/numeric/tensor.hpp"

namespace reldet::numeric {

/// Central differences (f(x + eps·e_i) − f(x − eps·e_i)) / 2eps per coordinate.
/// Throws ContractError unless eps > 0.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps);

/// |a − n| / max(|a|, |n|, floor): relative error that degrades to an absolute
/// error of scale `floor` when both gradients are near zero.
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  Tensor analytic;
  Tensor numeric;
};

/// Compares the tape gradient of `loss_fn` at x with finite_diff_grad. The
/// same function is evaluated on a fresh tape for the analytic gradient and
/// on constants for the numeric one.
GradCheckResult check_gradient(const std::function<Tensor(const Tensor& x)>& loss_fn,
                               const Tensor& x, double eps = 1e-5);

}  // namespace reldet::numeric
