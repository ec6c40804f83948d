#pragma once

// Lipschitz bijection of the unit square that moves the corner (1,1):
// Phi = Phi1^{-1} o Phi2 o Phi1 with Phi1 a piecewise-linear fold onto the
// unit triangle and Phi2 a smooth slide along its hypotenuse.

#include "regmap/reference_element.hpp"

namespace regmap {

/// [1/2 0; -1/2 1] x for x1 < x2, [1 -1/2; 0 1/2] x otherwise.
Vec2 fold_to_triangle(const Vec2& x);
Vec2 unfold_from_triangle(const Vec2& y);

/// Slide of the unit triangle fixing both legs and moving (1/2,1/2) to
/// (1/2 + s, 1/2 - s): id + 8 s x y^2 (1,-1) for s >= 0, id + 8 s x^2 y (1,-1)
/// for s < 0. Bijective for |s| <= 1/4.
Vec2 triangle_slide(const Vec2& x, double s, Mat2* jac = nullptr);

Vec2 corner_moving_map(const Vec2& x, double s = 0.25);

}  // namespace regmap
