#include "regmap/fixtures.hpp"

#include "regmap/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <numbers>

namespace regmap {

std::vector<Vec2> blended_element_nodes(const std::array<Vec2, 3>& v, int degree, const std::array<CurveFn, 3>& edges) {
  const auto lattice = lattice_nodes(degree);
  std::vector<Vec2> out;
  out.reserve(lattice.size());
  for (const auto& xi : lattice) {
    const std::array<double, 3> lam{1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
    Vec2 x = lam[0] * v[0] + lam[1] * v[1] + lam[2] * v[2];
    for (int e = 0; e < 3; ++e) {
      if (!edges[e]) continue;
      const int a = e;
      const int b = (e + 1) % 3;
      const double w = lam[a] + lam[b];
      if (w <= 1e-14) continue;
      const double t = lam[b] / w;
      x += w * (edges[e](t) - ((1.0 - t) * v[a] + t * v[b]));
    }
    out.push_back(x);
  }
  for (int i = 0; i < 3; ++i) out[i] = v[i];
  return out;
}

CurvedMesh build_curved_mesh(const std::vector<Vec2>& vertices, const std::vector<std::array<int, 3>>& triangles,
                             int degree, const std::map<std::pair<int, int>, CurveFn>& curves, const TagFn& tag) {
  CurvedMesh m;
  m.degree = degree;
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& t : triangles) {
    for (int e = 0; e < 3; ++e) ++edge_count[std::minmax(t[e], t[(e + 1) % 3])];
  }
  for (std::size_t k = 0; k < triangles.size(); ++k) {
    const auto& t = triangles[k];
    std::array<Vec2, 3> v{vertices[t[0]], vertices[t[1]], vertices[t[2]]};
    std::array<CurveFn, 3> edges;
    for (int e = 0; e < 3; ++e) {
      const int a = t[e];
      const int b = t[(e + 1) % 3];
      if (auto it = curves.find({a, b}); it != curves.end()) {
        edges[e] = it->second;
      } else if (auto jt = curves.find({b, a}); jt != curves.end()) {
        CurveFn g = jt->second;
        edges[e] = [g](double s) { return g(1.0 - s); };
      }
      if (edge_count[std::minmax(a, b)] == 1) {
        m.boundary_facets.push_back({static_cast<int>(k), e, tag ? tag(vertices[a], vertices[b]) : 0});
      }
    }
    m.elements.push_back(blended_element_nodes(v, degree, edges));
  }
  return m;
}

TagFn box_tags(const Vec2& lo, const Vec2& hi) {
  return [lo, hi](const Vec2& a, const Vec2& b) {
    const Vec2 mid = 0.5 * (a + b);
    const double tol = 1e-12 * (hi - lo).norm();
    if (std::abs(mid.y() - lo.y()) <= tol) return 1;
    if (std::abs(mid.x() - hi.x()) <= tol) return 2;
    if (std::abs(mid.y() - hi.y()) <= tol) return 3;
    if (std::abs(mid.x() - lo.x()) <= tol) return 4;
    return 5;
  };
}

namespace {

void structured_grid(int nx, int ny, const std::function<Vec2(int, int)>& vertex, std::vector<Vec2>& verts,
                     std::vector<std::array<int, 3>>& tris) {
  verts.clear();
  tris.clear();
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) verts.push_back(vertex(i, j));
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
}

}  // namespace

void pair_periodic(CurvedMesh& mesh, int tag_a, int tag_b, const Vec2& shift) {
  auto endpoints = [&](const BoundaryTag& b) {
    const auto idx = facet_node_indices(mesh.degree, b.local_facet);
    const auto& el = mesh.elements[b.element];
    return std::array<Vec2, 2>{el[idx.front()], el[idx.back()]};
  };
  const double tol = 1e-10 * std::max(1.0, shift.norm());
  std::vector<bool> used(mesh.boundary_facets.size(), false);
  for (std::size_t i = 0; i < mesh.boundary_facets.size(); ++i) {
    if (mesh.boundary_facets[i].tag != tag_a) continue;
    const auto a = endpoints(mesh.boundary_facets[i]);
    int partner = -1;
    for (std::size_t j = 0; j < mesh.boundary_facets.size() && partner < 0; ++j) {
      if (used[j] || mesh.boundary_facets[j].tag != tag_b) continue;
      const auto b = endpoints(mesh.boundary_facets[j]);
      const bool same = (a[0] + shift - b[0]).norm() < tol && (a[1] + shift - b[1]).norm() < tol;
      const bool flipped = (a[0] + shift - b[1]).norm() < tol && (a[1] + shift - b[0]).norm() < tol;
      if (same || flipped) partner = static_cast<int>(j);
    }
    if (partner < 0) {
      throw Error(ErrorCode::InconsistentPeriodicity, "boundary facet " + std::to_string(i) + " has no periodic partner");
    }
    used[partner] = true;
    mesh.periodic_pairs.push_back({static_cast<int>(i), partner});
  }
}

CurvedMesh unit_square_mesh(int degree) { return rectangle_mesh(1, 1, Vec2(0, 0), Vec2(1, 1), degree); }

CurvedMesh rectangle_mesh(int nx, int ny, const Vec2& lo, const Vec2& hi, int degree) {
  if (nx < 1 || ny < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one cell per direction");
  std::vector<Vec2> verts;
  std::vector<std::array<int, 3>> tris;
  structured_grid(
      nx, ny,
      [&](int i, int j) {
        return Vec2(lo.x() + (hi.x() - lo.x()) * i / nx, lo.y() + (hi.y() - lo.y()) * j / ny);
      },
      verts, tris);
  return build_curved_mesh(verts, tris, degree, {}, box_tags(lo, hi));
}

CurvedMesh parabolic_element(double h) {
  const std::vector<Vec2> verts{{0, 0}, {1, 0}, {0, 1}};
  std::map<std::pair<int, int>, CurveFn> curves;
  curves[{0, 1}] = [h](double t) { return Vec2(t, -4.0 * h * t * (1.0 - t)); };
  return build_curved_mesh(verts, {{0, 1, 2}}, 2, curves, [](const Vec2&, const Vec2&) { return 1; });
}

Vec2 semicircle_point(double s) {
  const double th = std::numbers::pi * s;
  return {std::cos(th), std::sin(th)};
}

CurvedMesh semicircle_mesh(int degree, int n_arc) {
  if (n_arc < 2) throw Error(ErrorCode::InvalidArgument, "semicircle needs at least two arc facets");
  std::vector<Vec2> verts{{0.0, 0.0}};
  for (int i = 0; i <= n_arc; ++i) verts.push_back(semicircle_point(static_cast<double>(i) / n_arc));
  std::vector<std::array<int, 3>> tris;
  std::map<std::pair<int, int>, CurveFn> curves;
  for (int i = 0; i < n_arc; ++i) {
    tris.push_back({0, i + 1, i + 2});
    const double s0 = static_cast<double>(i) / n_arc;
    const double s1 = static_cast<double>(i + 1) / n_arc;
    curves[{i + 1, i + 2}] = [s0, s1](double t) { return semicircle_point(s0 + t * (s1 - s0)); };
  }
  return build_curved_mesh(verts, tris, degree, curves, [](const Vec2& a, const Vec2& b) {
    return std::abs(a.y()) < 1e-14 && std::abs(b.y()) < 1e-14 ? 1 : 2;
  });
}

double front_domain_left(double y, double amplitude) { return -amplitude * std::sin(std::numbers::pi * y); }

CurvedMesh front_domain_mesh(int nx, int ny, int degree, double amplitude) {
  if (nx < 1 || ny < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one cell per direction");
  std::vector<Vec2> verts;
  std::vector<std::array<int, 3>> tris;
  structured_grid(
      nx, ny,
      [&](int i, int j) {
        const double y = static_cast<double>(j) / ny;
        const double s = static_cast<double>(i) / nx;
        return Vec2((1.0 - s) * front_domain_left(y, amplitude) + 2.0 * s, y);
      },
      verts, tris);
  std::map<std::pair<int, int>, CurveFn> curves;
  if (amplitude != 0.0) {
    for (int j = 0; j < ny; ++j) {
      const double ya = static_cast<double>(j) / ny;
      const double yb = static_cast<double>(j + 1) / ny;
      curves[{j * (nx + 1), (j + 1) * (nx + 1)}] = [ya, yb, amplitude](double t) {
        const double y = ya + t * (yb - ya);
        return Vec2(front_domain_left(y, amplitude), y);
      };
    }
  }
  const TagFn tag = [](const Vec2& a, const Vec2& b) {
    if (a.y() == 0.0 && b.y() == 0.0) return 1;
    if (a.x() == 2.0 && b.x() == 2.0) return 2;
    if (a.y() == 1.0 && b.y() == 1.0) return 3;
    return 4;
  };
  return build_curved_mesh(verts, tris, degree, curves, tag);
}

CurvedMesh elliptic_hole_mesh(bool admissible) {
  auto ellipse = [](double th) { return Vec2(0.5 * std::cos(th), 0.2 * std::sin(th)); };
  auto arc = [&](double th0, double th1) -> CurveFn {
    return [=](double t) { return ellipse(th0 + t * (th1 - th0)); };
  };
  const double pi = std::numbers::pi;
  // 0 L, 1 A, 2 B, 3 R, 4 TR, 5 C, 6 TL, 7 BL, 8 D, 9 BR
  std::vector<Vec2> verts{{-2, 0}, {-0.5, 0}, {0.5, 0}, {2, 0},  {2, 1},
                          {0, 1},  {-2, 1},   {-2, -1}, {0, -1}, {2, -1}};
  std::map<std::pair<int, int>, CurveFn> curves;
  if (admissible) {
    verts.push_back(ellipse(0.5 * pi));   // 10 E
    verts.push_back(ellipse(-0.5 * pi));  // 11 F
    // The arcs meet A and B vertically: the elements there open past the
    // vertical so the blended elements stay untangled.
    const std::vector<std::array<int, 3>> tris{{0, 1, 6},  {1, 10, 6}, {10, 5, 6},  {10, 4, 5},
                                               {10, 2, 4}, {2, 3, 4},  {0, 7, 1},   {1, 7, 11},
                                               {11, 7, 8}, {11, 8, 9}, {2, 11, 9}, {3, 2, 9}};
    curves[{1, 10}] = arc(pi, 0.5 * pi);
    curves[{10, 2}] = arc(0.5 * pi, 0.0);
    curves[{2, 11}] = arc(0.0, -0.5 * pi);
    curves[{11, 1}] = arc(-0.5 * pi, -pi);
    return build_curved_mesh(verts, tris, 2, curves, box_tags(Vec2(-2, -1), Vec2(2, 1)));
  }
  const std::vector<std::array<int, 3>> tris{{0, 1, 6}, {1, 5, 6}, {2, 3, 4}, {2, 4, 5}, {0, 7, 1},
                                             {1, 7, 8}, {3, 2, 9}, {2, 8, 9}, {1, 2, 5}, {2, 1, 8}};
  const TagFn tag = box_tags(Vec2(-2, -1), Vec2(2, 1));

  // The two arcs share their endpoints, so build the elements directly:
  // the vertex pair (A, B) carries a different curve in each element.
  CurvedMesh m;
  m.degree = 2;
  for (std::size_t k = 0; k < tris.size(); ++k) {
    const auto& t = tris[k];
    std::array<Vec2, 3> v{verts[t[0]], verts[t[1]], verts[t[2]]};
    std::array<CurveFn, 3> edges;
    if (k == 8) edges[0] = arc(pi, 0.0);
    if (k == 9) edges[0] = arc(0.0, -pi);
    m.elements.push_back(blended_element_nodes(v, 2, edges));
  }
  std::map<std::pair<int, int>, int> count;
  for (const auto& t : tris) {
    for (int e = 0; e < 3; ++e) ++count[std::minmax(t[e], t[(e + 1) % 3])];
  }
  for (std::size_t k = 0; k < tris.size(); ++k) {
    for (int e = 0; e < 3; ++e) {
      const int a = tris[k][e];
      const int b = tris[k][(e + 1) % 3];
      const bool hole = std::minmax(a, b) == std::minmax(1, 2);
      if (count[std::minmax(a, b)] == 1 || hole) {
        m.boundary_facets.push_back({static_cast<int>(k), e, hole ? 5 : tag(verts[a], verts[b])});
      }
    }
  }
  return m;
}

}  // namespace regmap
