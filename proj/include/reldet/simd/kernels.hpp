#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision inner loops used by the tensor ops. Every kernel has a
// portable scalar reference and, on x86-64, an AVX2+FMA variant. The variant
// is chosen once at startup from CPUID and may be pinned with the environment
// variable RELDET_SIMD=scalar|avx2.
//
// All matrices are row-major and densely packed. Kernels accumulate into the
// destination; callers zero it first when they want plain assignment.
namespace reldet::simd {

enum class Level { kScalar, kAvx2 };

struct KernelTable {
  /// C[m×n] += A[m×k] · B[k×n]
  void (*gemm)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);
  /// C[k×n] += A[m×k]ᵀ · B[m×n]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  /// C[m×k] += A[m×n] · B[k×n]ᵀ
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  /// y += alpha · x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
};

const KernelTable& scalar_kernels();
/// Falls back to the scalar table when the binary was built without AVX2 support.
const KernelTable& avx2_kernels();

bool is_supported(Level level);
Level detect_level();
Level active_level();
/// Throws ContractError if `level` is not supported on this machine.
void set_level(Level level);
std::string_view level_name(Level level);

const KernelTable& kernels();

inline void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  kernels().gemm(a, b, c, m, k, n);
}
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  kernels().gemm_tn(a, b, c, m, k, n);
}
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  kernels().gemm_nt(a, b, c, m, k, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  kernels().axpy(alpha, x, y, n);
}
inline double dot(const double* x, const double* y, std::size_t n) {
  return kernels().dot(x, y, n);
}

}  // namespace reldet::simd
