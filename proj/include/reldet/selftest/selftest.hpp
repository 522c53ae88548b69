#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "reldet/numeric/tensor.hpp"

// Built-in consistency suites shared by the `selftest` command and the test
// binaries: assignment vs exhaustive search, tape gradients vs central
// differences, GIoU invariants, the AP oracle, graph symmetry and SIMD/scalar
// kernel agreement.
namespace reldet::selftest {

/// One differentiable op under test. `loss` maps an input to a scalar and
/// must be a pure function of (x, fixture_seed).
struct GradCase {
  std::string name;
  numeric::Shape input_shape;
  double lo = -1.0;
  double hi = 1.0;
  std::function<numeric::Tensor(const numeric::Tensor& x, std::uint64_t fixture_seed)> loss;
};

std::vector<GradCase> op_gradient_cases();

/// A deliberately wrong backward rule, for negative controls.
GradCase broken_gradient_case();

struct GradSweep {
  std::size_t checks = 0;
  std::size_t failures = 0;
  double worst_error = 0.0;
  std::string worst_case;
};

/// Runs every case `trials` times on random inputs.
GradSweep sweep_gradients(const std::vector<GradCase>& cases, std::size_t trials,
                          std::uint64_t seed, double tolerance, double eps = 1e-5);

struct EndToEndCheck {
  std::size_t sampled = 0;
  double worst_error = 0.0;
  std::string worst_param;
};

/// Hungarian loss of a 16×16 scene through a d=8, N=4 model; compares the
/// tape gradient with central differences on `samples` random scalar
/// parameters, the assignment held fixed.
EndToEndCheck end_to_end_gradient_check(std::uint64_t seed, std::size_t samples,
                                        double eps = 1e-5);

struct SuiteResult {
  std::string name;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 0;
  bool inject_broken_gradient = false;
};

std::vector<SuiteResult> run_all(const Options& options);

}  // namespace reldet::selftest
