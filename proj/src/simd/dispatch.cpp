#include "regmap/simd/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace regmap::simd {

const KernelTable& kernels() {
  static const KernelTable& chosen = [&]() -> const KernelTable& {
    const char* env = std::getenv("REGMAP_SIMD");
    if (env && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace regmap::simd
