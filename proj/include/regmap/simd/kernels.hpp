#pragma once

// Data-parallel inner loops used by the objective evaluation. Every kernel
// has a scalar reference implementation; an AVX2/FMA variant is selected at
// runtime when the CPU supports it. Set REGMAP_SIMD=scalar to force the
// reference path.

#include <cstddef>
#include <string_view>

namespace regmap::simd {

struct BarrierResult {
  double sum = 0.0;         ///< sum_q w_q exp(min((eps - J_q) / c, cap))
  double min_det = 0.0;     ///< min_q J_q
  std::size_t capped = 0;   ///< points where the exponent hit the cap
};

/// Inputs of the Jacobian barrier kernel: displacement gradient components
/// at n points (u1_x = d u_1 / d x, ...), and weights.
struct BarrierInput {
  const double* u1x;
  const double* u1y;
  const double* u2x;
  const double* u2y;
  const double* weights;
  std::size_t n;
  double eps;
  double c_exp;
  double cap;
};

/// Per-point sensitivities d(term_q)/d(u1x, u1y, u2x, u2y); may be null.
struct BarrierSens {
  double* d_u1x;
  double* d_u1y;
  double* d_u2x;
  double* d_u2y;
};

struct KernelTable {
  std::string_view name;
  /// y = A x, A row-major rows x cols.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  /// y = A^T x, A row-major rows x cols (y has cols entries).
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  /// Exponential Jacobian barrier for J = (1 + u1x)(1 + u2y) - u1y u2x.
  BarrierResult (*jacobian_barrier)(const BarrierInput& in, const BarrierSens* sens);
  /// out[i] = exp(x[i]).
  void (*exp)(const double* x, std::size_t n, double* out);
};

const KernelTable& scalar_kernels();

/// Null when the running CPU (or the build) lacks AVX2/FMA.
const KernelTable* avx2_kernels();

/// Dispatched table, resolved once.
const KernelTable& kernels();

}  // namespace regmap::simd
