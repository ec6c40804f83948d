#include "regmap/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#if defined(__x86_64__) || defined(_M_X64)
#define REGMAP_HAVE_X86 1
#include <immintrin.h>
#else
#define REGMAP_HAVE_X86 0
#endif

namespace regmap::simd {

#if REGMAP_HAVE_X86
namespace {

#define REGMAP_AVX2 __attribute__((target("avx2,fma")))

REGMAP_AVX2 inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// exp(x) for four lanes: x = n ln2 + r, |r| <= ln2 / 2, Taylor to r^13, then
// scale by 2^n through the exponent bits. Lanes below -708 return 0.
REGMAP_AVX2 inline __m256d exp4(__m256d x) {
  const __m256d lo_lim = _mm256_set1_pd(-708.0);
  const __m256d hi_lim = _mm256_set1_pd(709.0);
  const __m256d under = _mm256_cmp_pd(x, lo_lim, _CMP_LT_OQ);
  x = _mm256_max_pd(_mm256_min_pd(x, hi_lim), lo_lim);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  static constexpr double inv_fact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
      1.0 / 40320.0,      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,
      1.0 / 6.0,          0.5,               1.0,              1.0};
  __m256d p = _mm256_set1_pd(inv_fact[0]);
  for (int k = 1; k < 14; ++k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(inv_fact[k]));

  __m128i ni = _mm256_cvtpd_epi32(n);
  __m256i e = _mm256_cvtepi32_epi64(ni);
  e = _mm256_add_epi64(e, _mm256_set1_epi64x(1023));
  e = _mm256_slli_epi64(e, 52);
  __m256d scale = _mm256_castsi256_pd(e);
  __m256d res = _mm256_mul_pd(p, scale);
  return _mm256_andnot_pd(under, res);
}

REGMAP_AVX2 void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 8 <= cols; c += 8) {
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(x + c), acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c + 4), _mm256_loadu_pd(x + c + 4), acc1);
    }
    for (; c + 4 <= cols; c += 4) {
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(x + c), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

REGMAP_AVX2 void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::fill(y, y + cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    const __m256d s = _mm256_set1_pd(x[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d yv = _mm256_loadu_pd(y + c);
      yv = _mm256_fmadd_pd(s, _mm256_loadu_pd(row + c), yv);
      _mm256_storeu_pd(y + c, yv);
    }
    for (; c < cols; ++c) y[c] += x[r] * row[c];
  }
}

REGMAP_AVX2 BarrierResult barrier_avx2(const BarrierInput& in, const BarrierSens* sens) {
  BarrierResult res;
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d eps = _mm256_set1_pd(in.eps);
  const __m256d inv_c = _mm256_set1_pd(1.0 / in.c_exp);
  const __m256d cap = _mm256_set1_pd(in.cap);
  const __m256d zero = _mm256_setzero_pd();
  __m256d sum = _mm256_setzero_pd();
  __m256d mind = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  std::size_t q = 0;
  for (; q + 4 <= in.n; q += 4) {
    const __m256d a = _mm256_add_pd(one, _mm256_loadu_pd(in.u1x + q));
    const __m256d b = _mm256_loadu_pd(in.u1y + q);
    const __m256d c = _mm256_loadu_pd(in.u2x + q);
    const __m256d d = _mm256_add_pd(one, _mm256_loadu_pd(in.u2y + q));
    const __m256d det = _mm256_fmsub_pd(a, d, _mm256_mul_pd(b, c));
    mind = _mm256_min_pd(mind, det);
    __m256d arg = _mm256_div_pd(_mm256_sub_pd(eps, det), _mm256_set1_pd(in.c_exp));
    const __m256d capped = _mm256_cmp_pd(arg, cap, _CMP_GT_OQ);
    res.capped += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(capped)));
    arg = _mm256_blendv_pd(arg, cap, capped);
    const __m256d e = _mm256_mul_pd(_mm256_loadu_pd(in.weights + q), exp4(arg));
    sum = _mm256_add_pd(sum, e);
    if (sens) {
      __m256d s = _mm256_mul_pd(_mm256_sub_pd(zero, e), inv_c);
      s = _mm256_blendv_pd(s, zero, capped);
      _mm256_storeu_pd(sens->d_u1x + q, _mm256_mul_pd(s, d));
      _mm256_storeu_pd(sens->d_u2y + q, _mm256_mul_pd(s, a));
      _mm256_storeu_pd(sens->d_u1y + q, _mm256_mul_pd(_mm256_sub_pd(zero, s), c));
      _mm256_storeu_pd(sens->d_u2x + q, _mm256_mul_pd(_mm256_sub_pd(zero, s), b));
    }
  }
  res.sum = hsum(sum);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, mind);
  res.min_det = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
  for (; q < in.n; ++q) {
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

REGMAP_AVX2 void exp_avx2(const double* x, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const KernelTable table{"avx2", gemv_avx2, gemv_t_avx2, barrier_avx2, exp_avx2};
  return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_kernels() { return nullptr; }

#endif

}  // namespace regmap::simd
