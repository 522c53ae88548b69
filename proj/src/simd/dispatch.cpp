#include <cstdlib>
#include <string>

#include "reldet/errors.hpp"
#include "reldet/simd/kernels.hpp"

namespace reldet::simd {
namespace {

Level& current() {
  static Level level = detect_level();
  return level;
}

}  // namespace

bool is_supported(Level level) {
  switch (level) {
    case Level::kScalar:
      return true;
    case Level::kAvx2:
#if defined(RELDET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Level detect_level() {
  if (const char* env = std::getenv("RELDET_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Level::kScalar;
    if (want == "avx2") {
      if (!is_supported(Level::kAvx2))
        throw ContractError("RELDET_SIMD=avx2 requested but AVX2/FMA is unavailable");
      return Level::kAvx2;
    }
    throw ContractError("RELDET_SIMD must be 'scalar' or 'avx2', got '" + want + "'");
  }
  return is_supported(Level::kAvx2) ? Level::kAvx2 : Level::kScalar;
}

Level active_level() { return current(); }

void set_level(Level level) {
  if (!is_supported(level))
    throw ContractError("SIMD level " + std::string(level_name(level)) + " is not supported");
  current() = level;
}

std::string_view level_name(Level level) {
  return level == Level::kAvx2 ? "avx2" : "scalar";
}

const KernelTable& kernels() {
  return current() == Level::kAvx2 ? avx2_kernels() : scalar_kernels();
}

}  // namespace reldet::simd
