#include "regmap/counterexample.hpp"

namespace regmap {

Vec2 fold_to_triangle(const Vec2& x) {
  if (x.x() < x.y()) return {0.5 * x.x(), -0.5 * x.x() + x.y()};
  return {x.x() - 0.5 * x.y(), 0.5 * x.y()};
}

Vec2 unfold_from_triangle(const Vec2& y) {
  const Vec2 a(2.0 * y.x(), y.y() + y.x());
  if (a.x() < a.y()) return a;
  return {y.x() + y.y(), 2.0 * y.y()};
}

Vec2 triangle_slide(const Vec2& x, double s, Mat2* jac) {
  const double c = 8.0 * s;
  double g, gx, gy;
  if (s >= 0.0) {
    g = c * x.x() * x.y() * x.y();
    gx = c * x.y() * x.y();
    gy = 2.0 * c * x.x() * x.y();
  } else {
    g = c * x.x() * x.x() * x.y();
    gx = 2.0 * c * x.x() * x.y();
    gy = c * x.x() * x.x();
  }
  if (jac) *jac << 1.0 + gx, gy, -gx, 1.0 - gy;
  return {x.x() + g, x.y() - g};
}

Vec2 corner_moving_map(const Vec2& x, double s) { return unfold_from_triangle(triangle_slide(fold_to_triangle(x), s)); }

}  // namespace regmap
