#pragma once

#include "regmap/error.hpp"
#include "regmap/reference_element.hpp"

#include <doctest.h>

#include <random>

namespace regmap::testing {

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(20240611);
  return gen;
}

inline double uniform(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(rng()); }

inline double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng()); }

/// Uniform point in the reference triangle, kept `margin` away from its edges.
inline Vec2 random_reference_point(double margin = 0.0) {
  double u = uniform();
  double v = uniform();
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  const double s = 1.0 - 3.0 * margin;
  return {margin + s * u, margin + s * v};
}

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidArgument;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace regmap::testing
