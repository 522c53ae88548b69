#include "reldet/simd/kernels.hpp"

namespace reldet::simd {
namespace {

void gemm_ref(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = crow[j];
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      crow[j] = acc;
    }
  }
}

void gemm_tn_ref(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t p = 0; p < m; ++p) {
    const double* brow = b + p * n;
    for (std::size_t q = 0; q < k; ++q) {
      const double s = a[p * k + q];
      double* crow = c + q * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

double dot_ref(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void gemm_nt_ref(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t q = 0; q < k; ++q) c[i * k + q] += dot_ref(a + i * n, b + q * n, n);
}

void axpy_ref(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{gemm_ref, gemm_tn_ref, gemm_nt_ref, axpy_ref, dot_ref};
  return table;
}

}  // namespace reldet::simd
