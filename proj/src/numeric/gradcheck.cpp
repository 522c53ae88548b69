#include "reldet/numeric/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "reldet/errors.hpp"

namespace reldet::numeric {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_diff_grad: eps must be positive");
  Tensor probe = x.detach();
  std::vector<double> grad(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double saved = x[i];
    probe.mutable_data()[i] = saved + eps;
    const double up = f(probe);
    probe.mutable_data()[i] = saved - eps;
    const double down = f(probe);
    probe.mutable_data()[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return Tensor(x.shape(), std::move(grad));
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradient(const std::function<Tensor(const Tensor& x)>& loss_fn,
                               const Tensor& x, double eps) {
  GradCheckResult result;
  {
    Tape tape;
    const Tensor leaf = tape.watch(x.detach());
    const Tensor loss = loss_fn(leaf);
    if (loss.requires_grad()) {
      tape.backward(loss);
      result.analytic = tape.grad(leaf);
    } else {
      result.analytic = Tensor::zeros(x.shape());
    }
  }
  result.numeric =
      finite_diff_grad([&](const Tensor& probe) { return loss_fn(probe).item(); }, x, eps);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double err = relative_error(result.analytic[i], result.numeric[i]);
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace reldet::numeric
