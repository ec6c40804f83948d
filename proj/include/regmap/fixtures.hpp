#pragma once

// Small curved-mesh generators used by tests, examples and the `synth`
// subcommand.

#include "regmap/mesh.hpp"

#include <functional>
#include <map>
#include <utility>

namespace regmap {

/// Parameterized curve on [0, 1].
using CurveFn = std::function<Vec2(double)>;

/// Lattice nodes of one triangle whose edges follow the given curves (null
/// entries are straight). Edge e runs from vertex e to vertex (e + 1) % 3;
/// curved edges are blended into the interior linearly in the barycentrics.
std::vector<Vec2> blended_element_nodes(const std::array<Vec2, 3>& v, int degree, const std::array<CurveFn, 3>& edges);

/// Assigns a boundary tag from the facet endpoints.
using TagFn = std::function<int(const Vec2&, const Vec2&)>;

/// Curved mesh from a vertex/triangle list. `curves` maps a directed vertex
/// pair (a, b) to a curve with gamma(0) = x_a, gamma(1) = x_b; the reversed
/// pair is looked up automatically.
CurvedMesh build_curved_mesh(const std::vector<Vec2>& vertices, const std::vector<std::array<int, 3>>& triangles,
                             int degree, const std::map<std::pair<int, int>, CurveFn>& curves = {},
                             const TagFn& tag = {});

/// Tags 1 bottom, 2 right, 3 top, 4 left for axis-aligned boxes.
TagFn box_tags(const Vec2& lo, const Vec2& hi);

/// Adds periodic pairs between boundary facets tagged `tag_a` and those
/// tagged `tag_b` whose endpoints coincide after translating by `shift`.
/// Throws InconsistentPeriodicity when a facet has no partner.
void pair_periodic(CurvedMesh& mesh, int tag_a, int tag_b, const Vec2& shift);

/// [0,1]^2 split along the diagonal (0,0)-(1,1).
CurvedMesh unit_square_mesh(int degree);

/// Structured nx-by-ny box mesh, each cell split along its rising diagonal.
CurvedMesh rectangle_mesh(int nx, int ny, const Vec2& lo, const Vec2& hi, int degree);

/// Reference triangle with edge 0 bent into the parabola y = -4 h x (1 - x);
/// degree 2, so the curved edge is exact.
CurvedMesh parabolic_element(double h);

/// Upper half of the unit disk, fan triangulation from the origin with
/// `n_arc` arc facets of equal angle.
CurvedMesh semicircle_mesh(int degree, int n_arc = 4);
/// Point on the unit upper semicircle at angle fraction s in [0, 1].
Vec2 semicircle_point(double s);

/// [0,2] x [0,1] with the left side bulged to x = -a sin(pi y); tags 1 bottom,
/// 2 right, 3 top, 4 left.
CurvedMesh front_domain_mesh(int nx, int ny, int degree, double amplitude);
double front_domain_left(double y, double amplitude);

/// Box [-2,2] x [-1,1] with an elliptic hole (semi-axes 0.5, 0.2), degree 2.
/// With `admissible = false` the hole has only the two vertices (+-0.5, 0):
/// its two arcs collapse onto the same chord of the linearization.
CurvedMesh elliptic_hole_mesh(bool admissible);

}  // namespace regmap
