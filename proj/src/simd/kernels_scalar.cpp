#include "regmap/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace regmap::simd {
namespace {

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::fill(y, y + cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    const double s = x[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] += s * row[c];
  }
}

BarrierResult barrier_scalar(const BarrierInput& in, const BarrierSens* sens) {
  BarrierResult res;
  res.min_det = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < in.n; ++q) {
    const double a = 1.0 + in.u1x[q];
    const double b = in.u1y[q];
    const double c = in.u2x[q];
    const double d = 1.0 + in.u2y[q];
    const double det = a * d - b * c;
    res.min_det = std::min(res.min_det, det);
    double arg = (in.eps - det) / in.c_exp;
    const bool capped = arg > in.cap;
    if (capped) {
      arg = in.cap;
      ++res.capped;
    }
    const double e = in.weights[q] * std::exp(arg);
    res.sum += e;
    if (sens) {
      const double s = capped ? 0.0 : -e / in.c_exp;
      sens->d_u1x[q] = s * d;
      sens->d_u2y[q] = s * a;
      sens->d_u1y[q] = -s * c;
      sens->d_u2x[q] = -s * b;
    }
  }
  return res;
}

void exp_scalar(const double* x, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", gemv_scalar, gemv_t_scalar, barrier_scalar, exp_scalar};
  return table;
}

}  // namespace regmap::simd
