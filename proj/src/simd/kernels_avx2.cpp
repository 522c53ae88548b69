#include "reldet/simd/kernels.hpp"

#if defined(RELDET_HAVE_AVX2)
#include <immintrin.h>
#endif

namespace reldet::simd {

#if defined(RELDET_HAVE_AVX2)
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

// C row i is held in registers 16 columns at a time while the k loop streams
// through B.
void gemm_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      __m256d c2 = _mm256_loadu_pd(crow + j + 8);
      __m256d c3 = _mm256_loadu_pd(crow + j + 12);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d s = _mm256_broadcast_sd(arow + p);
        const double* brow = b + p * n + j;
        c0 = _mm256_fmadd_pd(s, _mm256_loadu_pd(brow), c0);
        c1 = _mm256_fmadd_pd(s, _mm256_loadu_pd(brow + 4), c1);
        c2 = _mm256_fmadd_pd(s, _mm256_loadu_pd(brow + 8), c2);
        c3 = _mm256_fmadd_pd(s, _mm256_loadu_pd(brow + 12), c3);
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::size_t p = 0; p < k; ++p)
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + p), _mm256_loadu_pd(b + p * n + j), c0);
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < n; ++j) {
      double acc = crow[j];
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      crow[j] = acc;
    }
  }
}

void gemm_tn_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
  for (std::size_t p = 0; p < m; ++p) {
    const double* brow = b + p * n;
    for (std::size_t q = 0; q < k; ++q) axpy_avx2(a[p * k + q], brow, c + q * n, n);
  }
}

void gemm_nt_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t q = 0; q < k; ++q) c[i * k + q] += dot_avx2(a + i * n, b + q * n, n);
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{gemm_avx2, gemm_tn_avx2, gemm_nt_avx2, axpy_avx2, dot_avx2};
  return table;
}

#else

const KernelTable& avx2_kernels() { return scalar_kernels(); }

#endif

}  // namespace reldet::simd
