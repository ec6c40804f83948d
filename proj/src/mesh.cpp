#include "regmap/mesh.hpp"

#include "regmap/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace regmap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

std::string fmt_point(const Vec2& p) {
  std::ostringstream os;
  os.precision(6);
  os << "(" << p.x() << ", " << p.y() << ")";
  return os.str();
}

double bbox_diagonal(const std::vector<Vec2>& pts) {
  if (pts.empty()) return 0.0;
  Vec2 lo = pts.front();
  Vec2 hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

// Segment [a,b] against [c,d], touching included.
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double eps) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) { return cross(q - p, r - p); };
  auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r, double tol) {
    return r.x() >= std::min(p.x(), q.x()) - tol && r.x() <= std::max(p.x(), q.x()) + tol &&
           r.y() >= std::min(p.y(), q.y()) - tol && r.y() <= std::max(p.y(), q.y()) + tol;
  };
  const double d1 = orient(c, d, a);
  const double d2 = orient(c, d, b);
  const double d3 = orient(a, b, c);
  const double d4 = orient(a, b, d);
  const bool straddle1 = (d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps);
  const bool straddle2 = (d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps);
  if (straddle1 && straddle2) return true;
  const double tol = std::sqrt(eps);
  if (std::abs(d1) <= eps && on_segment(c, d, a, tol)) return true;
  if (std::abs(d2) <= eps && on_segment(c, d, b, tol)) return true;
  if (std::abs(d3) <= eps && on_segment(a, b, c, tol)) return true;
  if (std::abs(d4) <= eps && on_segment(a, b, d, tol)) return true;
  return false;
}

}  // namespace

void CurvedMesh::validate_shape() const {
  if (degree < 1 || degree > 10) throw Error(ErrorCode::InvalidArgument, "mesh degree must be in [1, 10]");
  if (elements.empty()) throw Error(ErrorCode::InvalidArgument, "mesh has no elements");
  const std::size_t n = static_cast<std::size_t>(nodes_per_element());
  for (std::size_t k = 0; k < elements.size(); ++k) {
    if (elements[k].size() != n) {
      throw Error(ErrorCode::InvalidArgument, "element " + std::to_string(k) + " has " +
                                                  std::to_string(elements[k].size()) + " nodes, expected " +
                                                  std::to_string(n));
    }
    for (const auto& p : elements[k]) {
      if (!p.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite node in element " + std::to_string(k));
    }
  }
  for (const auto& t : boundary_facets) {
    if (t.element < 0 || t.element >= num_elements() || t.local_facet < 0 || t.local_facet > 2) {
      throw Error(ErrorCode::InvalidArgument, "boundary facet references element " + std::to_string(t.element) +
                                                  " facet " + std::to_string(t.local_facet));
    }
  }
  const int nb = static_cast<int>(boundary_facets.size());
  for (const auto& p : periodic_pairs) {
    if (p[0] < 0 || p[0] >= nb || p[1] < 0 || p[1] >= nb || p[0] == p[1]) {
      throw Error(ErrorCode::InvalidArgument, "periodic pair references an invalid boundary facet");
    }
  }
}

std::vector<int> merge_points(const std::vector<Vec2>& points, double tol, std::vector<Vec2>& unique) {
  const int n = static_cast<int>(points.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (points[a].x() != points[b].x()) return points[a].x() < points[b].x();
    if (points[a].y() != points[b].y()) return points[a].y() < points[b].y();
    return a < b;
  });
  std::vector<int> rep(n, -1);
  for (int a = 0; a < n; ++a) {
    const int i = order[a];
    if (rep[i] >= 0) continue;
    rep[i] = i;
    for (int b = a + 1; b < n && points[order[b]].x() - points[i].x() <= tol; ++b) {
      const int j = order[b];
      if (rep[j] < 0 && (points[j] - points[i]).norm() <= tol) rep[j] = i;
    }
  }
  std::vector<int> rep_id(n, -1);
  std::vector<int> id(n, -1);
  unique.clear();
  for (int i = 0; i < n; ++i) {
    const int r = rep[i];
    if (rep_id[r] < 0) {
      rep_id[r] = static_cast<int>(unique.size());
      unique.push_back(points[i]);
    }
    id[i] = rep_id[r];
  }
  return id;
}

NodeTable build_node_table(const CurvedMesh& mesh) {
  std::vector<Vec2> all;
  for (const auto& el : mesh.elements) all.insert(all.end(), el.begin(), el.end());
  NodeTable table;
  const auto id = merge_points(all, 1e-10 * bbox_diagonal(all), table.nodes);
  std::size_t c = 0;
  table.element_nodes.resize(mesh.elements.size());
  for (std::size_t k = 0; k < mesh.elements.size(); ++k) {
    for (std::size_t i = 0; i < mesh.elements[k].size(); ++i) table.element_nodes[k].push_back(id[c++]);
  }
  return table;
}

// ---------------------------------------------------------------------------
// PolytopeMesh

PolytopeMesh::PolytopeMesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
                           const std::vector<BoundaryTag>& tags, const std::vector<std::array<int, 2>>& periodic)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  if (triangles_.empty()) throw Error(ErrorCode::InvalidArgument, "mesh has no elements");
  const int nv = num_vertices();
  for (const auto& t : triangles_) {
    for (int v : t) {
      if (v < 0 || v >= nv) throw Error(ErrorCode::InvalidArgument, "triangle references a missing vertex");
    }
  }
  diameter_ = bbox_diagonal(vertices_);
  const int ne = num_elements();
  x0_.resize(ne);
  a_.resize(ne);
  ainv_.resize(ne);
  for (int k = 0; k < ne; ++k) {
    const auto& t = triangles_[k];
    x0_[k] = vertices_[t[0]];
    a_[k].col(0) = vertices_[t[1]] - vertices_[t[0]];
    a_[k].col(1) = vertices_[t[2]] - vertices_[t[0]];
    const double det = a_[k].determinant();
    if (!(det > 1e-14 * diameter_ * diameter_)) {
      throw Error(ErrorCode::InadmissibleMesh,
                  "element " + std::to_string(k) + " of the linearization has nonpositive area");
    }
    ainv_[k] = a_[k].inverse();
    total_area_ += 0.5 * det;
  }
  vertex_elements_.assign(nv, {});
  for (int k = 0; k < ne; ++k) {
    for (int v : triangles_[k]) vertex_elements_[v].push_back(k);
  }
  build_topology(tags, periodic);
  build_boundary();
  check_boundary_simple();
  std::vector<Vec2> c(ne);
  for (int k = 0; k < ne; ++k) c[k] = centroid(k);
  centroids_ = KdTree(std::move(c));
}

void PolytopeMesh::build_topology(const std::vector<BoundaryTag>& tags,
                                  const std::vector<std::array<int, 2>>& periodic) {
  std::map<std::pair<int, int>, int> lookup;
  element_facets_.assign(triangles_.size(), {-1, -1, -1});
  for (int k = 0; k < num_elements(); ++k) {
    for (int e = 0; e < 3; ++e) {
      const int a = triangles_[k][e];
      const int b = triangles_[k][(e + 1) % 3];
      const auto key = std::minmax(a, b);
      auto it = lookup.find(key);
      if (it == lookup.end()) {
        Facet f;
        f.v = {a, b};
        f.elem = {k, -1};
        f.local = {e, -1};
        f.length = (vertices_[b] - vertices_[a]).norm();
        lookup.emplace(key, static_cast<int>(facets_.size()));
        element_facets_[k][e] = static_cast<int>(facets_.size());
        facets_.push_back(f);
        continue;
      }
      Facet& f = facets_[it->second];
      if (f.elem[1] >= 0) {
        throw Error(ErrorCode::InadmissibleMesh, "facet " + fmt_point(vertices_[a]) + "-" + fmt_point(vertices_[b]) +
                                                     " is shared by more than two elements");
      }
      if (f.v[0] == a) {
        throw Error(ErrorCode::InadmissibleMesh, "elements " + std::to_string(f.elem[0]) + " and " +
                                                     std::to_string(k) + " overlap");
      }
      f.elem[1] = k;
      f.local[1] = e;
      element_facets_[k][e] = it->second;
    }
  }
  for (int j = 0; j < num_facets(); ++j) (facets_[j].boundary() ? boundary_ : interior_).push_back(j);

  tagged_facets_.assign(tags.size(), -1);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& t = tags[i];
    if (t.element < 0 || t.element >= num_elements() || t.local_facet < 0 || t.local_facet > 2) {
      throw Error(ErrorCode::InvalidArgument, "boundary tag references a missing facet");
    }
    const int j = element_facets_[t.element][t.local_facet];
    Facet& f = facets_[j];
    if (!f.boundary()) {
      const int other = f.elem[0] == t.element ? f.elem[1] : f.elem[0];
      throw Error(ErrorCode::InadmissibleMesh,
                  "boundary facet " + std::to_string(t.local_facet) + " of element " + std::to_string(t.element) +
                      " collapses onto the linearized facet of element " + std::to_string(other) +
                      " (linearized boundary self-intersects)");
    }
    if (f.tag >= 0) throw Error(ErrorCode::InvalidArgument, "boundary facet tagged twice");
    f.tag = t.tag;
    tagged_facets_[i] = j;
  }
  for (int j : boundary_) {
    if (facets_[j].tag < 0) {
      if (!tags.empty()) {
        throw Error(ErrorCode::InvalidArgument, "boundary facet " + fmt_point(vertices_[facets_[j].v[0]]) + "-" +
                                                    fmt_point(vertices_[facets_[j].v[1]]) + " has no tag");
      }
      facets_[j].tag = 0;
    }
  }
  for (const auto& p : periodic) {
    if (p[0] < 0 || p[1] < 0 || p[0] >= static_cast<int>(tags.size()) || p[1] >= static_cast<int>(tags.size())) {
      throw Error(ErrorCode::InvalidArgument, "periodic pair references an invalid boundary facet");
    }
    periodic_.push_back({tagged_facets_[p[0]], tagged_facets_[p[1]]});
  }
}

void PolytopeMesh::build_boundary() {
  const int nv = num_vertices();
  boundary_in_.assign(nv, -1);
  boundary_out_.assign(nv, -1);
  for (int j : boundary_) {
    const auto& f = facets_[j];
    if (boundary_out_[f.v[0]] >= 0 || boundary_in_[f.v[1]] >= 0) {
      const int v = boundary_out_[f.v[0]] >= 0 ? f.v[0] : f.v[1];
      throw Error(ErrorCode::InadmissibleMesh,
                  "boundary vertex " + fmt_point(vertices_[v]) + " joins more than two boundary facets");
    }
    boundary_out_[f.v[0]] = j;
    boundary_in_[f.v[1]] = j;
  }
  for (int v = 0; v < nv; ++v) {
    if ((boundary_in_[v] >= 0) != (boundary_out_[v] >= 0)) {
      throw Error(ErrorCode::InadmissibleMesh, "open boundary chain at " + fmt_point(vertices_[v]));
    }
  }
  std::vector<bool> seen(facets_.size(), false);
  for (int j : boundary_) {
    if (seen[j]) continue;
    std::vector<int> loop;
    int f = j;
    while (!seen[f]) {
      seen[f] = true;
      loop.push_back(f);
      f = boundary_out_[facets_[f].v[1]];
    }
    loops_.push_back(std::move(loop));
  }
  in_v_.assign(nv, false);
  for (int v = 0; v < nv; ++v) {
    if (boundary_in_[v] < 0) continue;
    const auto& fi = facets_[boundary_in_[v]];
    const auto& fo = facets_[boundary_out_[v]];
    const Vec2 ti = (vertices_[fi.v[1]] - vertices_[fi.v[0]]).normalized();
    const Vec2 to = (vertices_[fo.v[1]] - vertices_[fo.v[0]]).normalized();
    in_v_[v] = std::abs(cross(ti, to)) > 1e-12 || ti.dot(to) < 0.0;
  }
}

void PolytopeMesh::check_boundary_simple() const {
  const int nb = static_cast<int>(boundary_.size());
  struct Seg {
    double xmin, xmax;
    int facet;
  };
  std::vector<Seg> segs;
  segs.reserve(nb);
  for (int j : boundary_) {
    const auto& f = facets_[j];
    const double x0 = vertices_[f.v[0]].x();
    const double x1 = vertices_[f.v[1]].x();
    segs.push_back({std::min(x0, x1), std::max(x0, x1), j});
  }
  std::sort(segs.begin(), segs.end(), [](const Seg& a, const Seg& b) { return a.xmin < b.xmin; });
  const double eps = 1e-14 * diameter_ * diameter_;
  const double pad = 1e-12 * diameter_;
  for (int a = 0; a < nb; ++a) {
    const auto& fa = facets_[segs[a].facet];
    for (int b = a + 1; b < nb && segs[b].xmin <= segs[a].xmax + pad; ++b) {
      const auto& fb = facets_[segs[b].facet];
      const bool adjacent = fa.v[0] == fb.v[0] || fa.v[0] == fb.v[1] || fa.v[1] == fb.v[0] || fa.v[1] == fb.v[1];
      if (adjacent) continue;
      if (segments_intersect(vertices_[fa.v[0]], vertices_[fa.v[1]], vertices_[fb.v[0]], vertices_[fb.v[1]], eps)) {
        throw Error(ErrorCode::InadmissibleMesh, "linearized boundary self-intersects near " +
                                                     fmt_point(vertices_[fa.v[0]]));
      }
    }
  }
}

std::vector<int> PolytopeMesh::polytope_vertices() const {
  std::vector<int> out;
  for (int v = 0; v < num_vertices(); ++v) {
    if (in_v_[v]) out.push_back(v);
  }
  return out;
}

Vec2 PolytopeMesh::centroid(int k) const {
  const auto& t = triangles_[k];
  return (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
}

Vec2 PolytopeMesh::outward_normal(int facet) const {
  const auto& f = facets_[facet];
  const Vec2 d = vertices_[f.v[1]] - vertices_[f.v[0]];
  return Vec2(d.y(), -d.x()).normalized();
}

Eigen::Vector3d PolytopeMesh::barycentric(int k, const Vec2& x) const {
  const Vec2 xi = to_reference(k, x);
  return {1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
}

bool PolytopeMesh::contains(int k, const Vec2& x, Eigen::Vector3d& bary) const {
  bary = barycentric(k, x);
  return bary.minCoeff() >= -kLocateTol;
}

std::optional<Location> PolytopeMesh::try_locate(const Vec2& x) const {
  Eigen::Vector3d bary;
  int hit = -1;
  const int nc = std::min(8, num_elements());
  for (int k : centroids_.nearest(x, nc)) {
    if (contains(k, x, bary)) {
      hit = k;
      break;
    }
  }
  if (hit < 0) {
    for (int k = 0; k < num_elements(); ++k) {
      if (contains(k, x, bary)) {
        hit = k;
        break;
      }
    }
  }
  if (hit < 0) return std::nullopt;
  int best = hit;
  for (int v : triangles_[hit]) {
    for (int k : vertex_elements_[v]) {
      if (k < best && contains(k, x, bary)) best = k;
    }
  }
  return Location{best, barycentric(best, x), false};
}

Location PolytopeMesh::locate(const Vec2& x) const {
  auto loc = try_locate(x);
  if (!loc) throw Error(ErrorCode::OutsideDomain, "point " + fmt_point(x) + " is outside the mesh");
  return *loc;
}

Location PolytopeMesh::locate_or_nearest(const Vec2& x) const {
  if (auto loc = try_locate(x)) return *loc;
  const int k = centroids_.nearest_one(x);
  return Location{k, barycentric(k, x), true};
}

CurvedMesh straight_curved_mesh(const PolytopeMesh& pm, int degree) {
  CurvedMesh m;
  m.degree = degree;
  const auto lattice = lattice_nodes(degree);
  for (int k = 0; k < pm.num_elements(); ++k) {
    std::vector<Vec2> nodes;
    nodes.reserve(lattice.size());
    for (const auto& xi : lattice) nodes.push_back(pm.from_reference(k, xi));
    const auto& t = pm.triangle(k);
    for (int i = 0; i < 3; ++i) nodes[i] = pm.vertex(t[i]);
    m.elements.push_back(std::move(nodes));
  }
  std::vector<int> tag_index(pm.num_facets(), -1);
  for (int j : pm.boundary_facets()) {
    const auto& f = pm.facet(j);
    tag_index[j] = static_cast<int>(m.boundary_facets.size());
    m.boundary_facets.push_back({f.elem[0], f.local[0], f.tag});
  }
  for (const auto& p : pm.periodic_pairs()) m.periodic_pairs.push_back({tag_index[p[0]], tag_index[p[1]]});
  return m;
}

// ---------------------------------------------------------------------------
// GeometricMap

namespace {

PolytopeMesh linearize_topology(CurvedMesh& mesh) {
  std::vector<Vec2> corners;
  corners.reserve(3 * mesh.elements.size());
  std::vector<Vec2> all;
  for (const auto& el : mesh.elements) {
    for (int i = 0; i < 3; ++i) corners.push_back(el[i]);
    all.insert(all.end(), el.begin(), el.end());
  }
  std::vector<Vec2> unique;
  const auto id = merge_points(corners, 1e-10 * bbox_diagonal(all), unique);
  std::vector<std::array<int, 3>> tris(mesh.elements.size());
  for (std::size_t k = 0; k < mesh.elements.size(); ++k) {
    for (int i = 0; i < 3; ++i) {
      tris[k][i] = id[3 * k + i];
      // Shared vertices become bitwise identical across elements.
      mesh.elements[k][i] = unique[tris[k][i]];
    }
  }
  return PolytopeMesh(std::move(unique), std::move(tris), mesh.boundary_facets, mesh.periodic_pairs);
}

}  // namespace

GeometricMap::GeometricMap(CurvedMesh mesh, GeometricMapOptions options)
    : curved_((mesh.validate_shape(), std::move(mesh))),
      basis_(curved_.degree),
      poly_(linearize_topology(curved_)) {
  const int ne = poly_.num_elements();
  const int n = basis_.size();
  const double diam = poly_.diameter();
  nodes_.resize(ne);
  for (int k = 0; k < ne; ++k) {
    nodes_[k].resize(2, n);
    for (int i = 0; i < n; ++i) nodes_[k].col(i) = curved_.elements[k][i];
  }

  // Conformity of shared facets.
  const int kdeg = curved_.degree;
  for (int j : poly_.interior_facets()) {
    const auto& f = poly_.facet(j);
    const auto left = facet_node_indices(kdeg, f.local[0]);
    const auto right = facet_node_indices(kdeg, f.local[1]);
    const int m = static_cast<int>(left.size());
    for (int i = 0; i < m; ++i) {
      const Vec2 a = nodes_[f.elem[0]].col(left[i]);
      const Vec2 b = nodes_[f.elem[1]].col(right[m - 1 - i]);
      if ((a - b).norm() > 1e-9 * diam) {
        throw Error(ErrorCode::InadmissibleMesh, "elements " + std::to_string(f.elem[0]) + " and " +
                                                     std::to_string(f.elem[1]) +
                                                     " do not share matching facet nodes (nonconforming or "
                                                     "collapsed linearization)");
      }
    }
  }

  const auto lattice = lattice_nodes(kdeg);
  double dev = 0.0;
  for (int k = 0; k < ne; ++k) {
    for (int i = 0; i < n; ++i) dev = std::max(dev, (poly_.from_reference(k, lattice[i]) - Vec2(nodes_[k].col(i))).norm());
  }
  identity_ = dev <= 1e-13 * diam;

  straight_.assign(poly_.num_facets(), true);
  for (int j : poly_.boundary_facets()) {
    const auto& f = poly_.facet(j);
    const Vec2 a = poly_.vertex(f.v[0]);
    const Vec2 nrm = poly_.outward_normal(j);
    for (int idx : facet_node_indices(kdeg, f.local[0])) {
      if (std::abs((Vec2(nodes_[f.elem[0]].col(idx)) - a).dot(nrm)) > 1e-12 * diam) straight_[j] = false;
    }
  }

  bbox_.resize(ne);
  std::vector<Vec2> centers(ne);
  for (int k = 0; k < ne; ++k) {
    Vec2 lo = nodes_[k].rowwise().minCoeff();
    Vec2 hi = nodes_[k].rowwise().maxCoeff();
    const Vec2 pad = Vec2::Constant(0.1 * (hi - lo).norm() + 1e-12 * diam);
    bbox_[k] = {lo - pad, hi + pad};
    centers[k] = eval_reference(k, Vec2(1.0 / 3.0, 1.0 / 3.0)).y;
  }
  curved_centroids_ = KdTree(std::move(centers));

  angular_.assign(poly_.num_vertices(), false);
  for (int v = 0; v < poly_.num_vertices(); ++v) {
    if (!poly_.on_boundary(v)) continue;
    Vec2 tin;
    Vec2 tout;
    facet_curve(poly_.incoming_facet(v), 1.0, &tin);
    facet_curve(poly_.outgoing_facet(v), 0.0, &tout);
    const double angle = std::atan2(std::abs(cross(tin, tout)), tin.dot(tout));
    angular_[v] = angle > options.angle_tol;
  }

  build_boundary_geometry();

  if (options.strict) {
    const auto report = check();
    if (!report.admissible) {
      std::string msg;
      for (const auto& v : report.violations) msg += (msg.empty() ? "" : "; ") + v;
      throw Error(ErrorCode::InadmissibleMesh, msg);
    }
  }
}

GeometricMap::Value GeometricMap::eval_reference(int k, const Vec2& xi) const {
  thread_local std::vector<Jet2> jets;
  jets.resize(basis_.size());
  basis_.evaluate(xi, jets);
  Value v;
  v.element = k;
  v.y.setZero();
  v.grad.setZero();
  const auto& x = nodes_[k];
  for (int i = 0; i < basis_.size(); ++i) {
    v.y += jets[i].v * x.col(i);
    v.grad.col(0) += jets[i].dx * x.col(i);
    v.grad.col(1) += jets[i].dy * x.col(i);
  }
  return v;
}

GeometricMap::Value GeometricMap::eval_in(int k, const Vec2& x) const {
  Value v = eval_reference(k, poly_.to_reference(k, x));
  v.grad = v.grad * poly_.inverse_jacobian(k);
  return v;
}

GeometricMap::Value GeometricMap::eval(const Vec2& x) const {
  const auto loc = poly_.locate(x);
  return eval_in(loc.element, x);
}

namespace {

enum class NewtonStatus { Inside, Outside, Failed };

bool in_expanded(const Vec2& xi, double m) { return xi.x() >= -m && xi.y() >= -m && xi.x() + xi.y() <= 1.0 + m; }

}  // namespace

std::optional<GeometricMap::Inverse> GeometricMap::invert_in(int k, const Vec2& y) const {
  const double diam = diameter();
  Vec2 xi(1.0 / 3.0, 1.0 / 3.0);
  int it = 0;
  int cut_streak = 0;
  bool converged = false;
  double res = kInf;
  for (; it <= kMaxNewton; ++it) {
    const Value v = eval_reference(k, xi);
    const Vec2 r = v.y - y;
    res = r.norm();
    if (res <= 1e-13 * diam) {
      converged = true;
      break;
    }
    if (it == kMaxNewton) break;
    const double det = v.grad.determinant();
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) return std::nullopt;
    const Vec2 step = -v.grad.inverse() * r;
    double s = 1.0;
    int cuts = 0;
    while (!in_expanded(xi + s * step, 0.5) && cuts < 20) {
      s *= 0.5;
      ++cuts;
    }
    if (cuts == 20) return std::nullopt;
    cut_streak = cuts > 0 ? cut_streak + 1 : 0;
    if (cut_streak >= 4) return std::nullopt;
    xi += s * step;
  }
  if (!converged && !(res <= 1e-10 * diam)) return std::nullopt;
  if (!in_expanded(xi, 1e-9)) return std::nullopt;
  const std::array<Vec2, 3> corners{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  Inverse out;
  out.element = k;
  out.iterations = it;
  out.x = poly_.from_reference(k, xi);
  for (int c = 0; c < 3; ++c) {
    if ((xi - corners[c]).norm() < 1e-12) out.x = poly_.vertex(poly_.triangle(k)[c]);
  }
  return out;
}

GeometricMap::Inverse GeometricMap::invert(const Vec2& y) const {
  if (identity_) {
    auto loc = poly_.try_locate(y);
    if (!loc) throw Error(ErrorCode::OutsideDomain, "point " + fmt_point(y) + " is outside the domain");
    return Inverse{y, loc->element, 0};
  }
  const int ne = poly_.num_elements();
  std::vector<bool> tried(ne, false);
  bool any_box = false;
  bool any_failed = false;
  auto attempt = [&](int k) -> std::optional<Inverse> {
    tried[k] = true;
    const auto& b = bbox_[k];
    const bool in_box = y.x() >= b[0].x() && y.y() >= b[0].y() && y.x() <= b[1].x() && y.y() <= b[1].y();
    if (!in_box) return std::nullopt;
    any_box = true;
    auto r = invert_in(k, y);
    if (!r) any_failed = true;
    return r;
  };
  for (int k : curved_centroids_.nearest(y, std::min(8, ne))) {
    if (auto r = attempt(k)) return *r;
  }
  for (int k = 0; k < ne; ++k) {
    if (tried[k]) continue;
    if (auto r = attempt(k)) return *r;
  }
  if (!any_box) throw Error(ErrorCode::OutsideDomain, "point " + fmt_point(y) + " is outside the domain");
  if (any_failed) {
    // Newton failures near the boundary: decide the side on the curved boundary.
    const BoundaryPoint bp = project_to_boundary(y);
    Vec2 tan;
    const Vec2 c = facet_curve(bp.facet, bp.t, &tan);
    if ((y - c).dot(Vec2(tan.y(), -tan.x())) <= 0.0) {
      throw Error(ErrorCode::NoConvergence, "inverse map did not converge at " + fmt_point(y));
    }
  }
  throw Error(ErrorCode::OutsideDomain, "point " + fmt_point(y) + " is outside the domain");
}

std::vector<int> GeometricMap::fictitious_vertices() const {
  std::vector<int> out;
  for (int v : poly_.polytope_vertices()) {
    if (!angular_[v]) out.push_back(v);
  }
  return out;
}

Vec2 GeometricMap::facet_curve(int facet, double t, Vec2* tangent, Vec2* second) const {
  const auto& f = poly_.facet(facet);
  const int k = f.elem[0];
  const int e = f.local[0];
  const Vec2 p0 = facet_point(e, 0.0);
  const Vec2 d = facet_point(e, 1.0) - p0;
  thread_local std::vector<Jet2> jets;
  jets.resize(basis_.size());
  basis_.evaluate(p0 + t * d, jets);
  Vec2 y = Vec2::Zero();
  Vec2 dy = Vec2::Zero();
  Vec2 ddy = Vec2::Zero();
  const auto& x = nodes_[k];
  for (int i = 0; i < basis_.size(); ++i) {
    y += jets[i].v * x.col(i);
    dy += (jets[i].dx * d.x() + jets[i].dy * d.y()) * x.col(i);
    ddy += (jets[i].dxx * d.x() * d.x() + 2.0 * jets[i].dxy * d.x() * d.y() + jets[i].dyy * d.y() * d.y()) * x.col(i);
  }
  if (tangent) *tangent = dy;
  if (second) *second = ddy;
  return y;
}

void GeometricMap::build_boundary_geometry() {
  const int nf = poly_.num_facets();
  polylines_.assign(nf, {});
  facet_loop_.assign(nf, -1);
  facet_offset_.assign(nf, 0.0);
  for (int j : poly_.boundary_facets()) {
    Polyline& pl = polylines_[j];
    pl.pts.resize(kPolylineSegments + 1);
    pl.cum.resize(kPolylineSegments + 1);
    for (int i = 0; i <= kPolylineSegments; ++i) {
      pl.pts[i] = facet_curve(j, static_cast<double>(i) / kPolylineSegments);
      pl.cum[i] = i == 0 ? 0.0 : pl.cum[i - 1] + (pl.pts[i] - pl.pts[i - 1]).norm();
    }
  }
  const auto& loops = poly_.boundary_loops();
  loop_length_.assign(loops.size(), 0.0);
  loop_angular_.assign(loops.size(), {});
  for (std::size_t l = 0; l < loops.size(); ++l) {
    double offset = 0.0;
    for (int j : loops[l]) {
      facet_loop_[j] = static_cast<int>(l);
      facet_offset_[j] = offset;
      if (angular_[poly_.facet(j).v[0]]) loop_angular_[l].push_back(offset);
      offset += polylines_[j].cum.back();
    }
    loop_length_[l] = offset;
  }
}

double GeometricMap::arc_position(int facet, double t) const {
  const auto& pl = polylines_[facet];
  const double u = std::clamp(t, 0.0, 1.0) * kPolylineSegments;
  const int i = std::min(static_cast<int>(u), kPolylineSegments - 1);
  const double frac = u - i;
  return facet_offset_[facet] + pl.cum[i] + frac * (pl.cum[i + 1] - pl.cum[i]);
}

BoundaryPoint GeometricMap::project_to_boundary(const Vec2& x) const {
  BoundaryPoint best;
  best.distance = kInf;
  for (int j : poly_.boundary_facets()) {
    const auto& pts = polylines_[j].pts;
    for (int i = 0; i < kPolylineSegments; ++i) {
      const Vec2 d = pts[i + 1] - pts[i];
      const double len2 = d.squaredNorm();
      const double u = len2 > 0.0 ? std::clamp((x - pts[i]).dot(d) / len2, 0.0, 1.0) : 0.0;
      const double dist = (pts[i] + u * d - x).norm();
      if (dist < best.distance) {
        best.distance = dist;
        best.facet = j;
        best.t = (i + u) / kPolylineSegments;
      }
    }
  }
  // Newton refinement of the closest point on the exact facet curve.
  double t = best.t;
  double dist = (facet_curve(best.facet, t) - x).norm();
  for (int it = 0; it < 30; ++it) {
    Vec2 d1;
    Vec2 d2;
    const Vec2 g = facet_curve(best.facet, t, &d1, &d2) - x;
    const double gp = g.dot(d1);
    double gpp = d1.squaredNorm() + g.dot(d2);
    if (!(gpp > 0.0)) gpp = d1.squaredNorm();
    if (!(gpp > 0.0)) break;
    const double tn = std::clamp(t - gp / gpp, 0.0, 1.0);
    const double dn = (facet_curve(best.facet, tn) - x).norm();
    if (dn > dist) break;
    const double dt = std::abs(tn - t);
    t = tn;
    dist = dn;
    if (dt < 1e-16) break;
  }
  if (dist < best.distance) {
    best.distance = dist;
    best.t = t;
  }
  best.loop = facet_loop_[best.facet];
  best.s = arc_position(best.facet, best.t);
  return best;
}

double GeometricMap::geodesic(const Vec2& x, const Vec2& y, double tol) const {
  if (tol < 0.0) tol = 1e-8 * diameter();
  const auto px = project_to_boundary(x);
  const auto py = project_to_boundary(y);
  if (px.distance > tol) throw Error(ErrorCode::PointNotOnBoundary, "point " + fmt_point(x) + " is not on the boundary");
  if (py.distance > tol) throw Error(ErrorCode::PointNotOnBoundary, "point " + fmt_point(y) + " is not on the boundary");
  if (x == y) return 0.0;
  if (px.loop != py.loop) return kInf;
  const double len = loop_length_[px.loop];
  const double eps = 1e-12 * len;
  auto wrap = [len](double s) {
    double r = std::fmod(s, len);
    return r < 0.0 ? r + len : r;
  };
  const double fwd = wrap(py.s - px.s);
  if (fwd <= eps || fwd >= len - eps) return 0.0;
  const double bwd = len - fwd;
  bool fwd_open = true;
  bool bwd_open = true;
  for (double a : loop_angular_[px.loop]) {
    const double r = wrap(a - px.s);
    if (r > eps && r < fwd - eps) fwd_open = false;
    if (r > fwd + eps && r < len - eps) bwd_open = false;
  }
  double out = kInf;
  if (fwd_open) out = fwd;
  if (bwd_open) out = std::min(out, bwd);
  return out;
}

double GeometricMap::min_jacobian(int quad_degree) const {
  if (quad_degree < 0) quad_degree = default_quadrature_degree(degree());
  const auto rule = simplex_quadrature(quad_degree);
  double jmin = kInf;
  for (int k = 0; k < poly_.num_elements(); ++k) {
    const double det_a = poly_.jacobian(k).determinant();
    for (const auto& xi : rule.points) {
      jmin = std::min(jmin, eval_reference(k, xi).grad.determinant() / det_a);
    }
  }
  return jmin;
}

AdmissibilityReport GeometricMap::check() const {
  AdmissibilityReport r;
  const double diam = diameter();
  r.min_jacobian = min_jacobian();
  if (!(r.min_jacobian > 0.0)) {
    r.violations.push_back("nonpositive Jacobian of the geometric map (min " + std::to_string(r.min_jacobian) + ")");
  }
  for (int v = 0; v < poly_.num_vertices(); ++v) {
    const Vec2 x = poly_.vertex(v);
    r.max_vertex_error = std::max(r.max_vertex_error, (eval(x).y - x).norm());
  }
  if (r.max_vertex_error > 0.0) r.violations.push_back("geometric map moves a mesh vertex");

  const int samples = 2 * degree() + 3;
  for (int j : poly_.boundary_facets()) {
    if (!straight_[j]) continue;
    const auto& f = poly_.facet(j);
    const Vec2 a = poly_.vertex(f.v[0]);
    const Vec2 b = poly_.vertex(f.v[1]);
    const Vec2 nrm = poly_.outward_normal(j);
    for (int i = 0; i <= samples; ++i) {
      const double t = static_cast<double>(i) / samples;
      const Vec2 y = facet_curve(j, t);
      r.max_straight_facet_normal_error = std::max(r.max_straight_facet_normal_error, std::abs((y - a).dot(nrm)));
      r.max_straight_facet_pointwise_error =
          std::max(r.max_straight_facet_pointwise_error, (y - (a + t * (b - a))).norm());
    }
  }
  if (r.max_straight_facet_normal_error > 1e-12 * diam) {
    r.violations.push_back("a straight boundary facet is not preserved by the geometric map");
  }

  for (int v = 0; v < poly_.num_vertices(); ++v) {
    if (poly_.in_V(v)) {
      ++r.num_polytope_vertices;
      if (!angular_[v]) ++r.num_fictitious_vertices;
    }
    if (angular_[v]) {
      ++r.num_angular_points;
      if (!poly_.in_V(v)) r.violations.push_back("angular point " + fmt_point(poly_.vertex(v)) + " is not a polytope vertex");
    }
  }
  r.admissible = r.violations.empty();
  return r;
}

double constant_C(const GeometricMap& m1, const GeometricMap& m2) {
  const double tol = 1e-3 * m1.diameter();
  const auto& p1 = m1.polytope();
  const auto& p2 = m2.polytope();
  double c = kInf;
  for (int a : m1.fictitious_vertices()) {
    for (int b : m2.fictitious_vertices()) c = std::min(c, m1.geodesic(p1.vertex(a), p2.vertex(b), tol));
  }
  auto same_set = [&](const GeometricMap& m) {
    const auto& p = m.polytope();
    const auto v = p.polytope_vertices();
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        if (p.vertex(v[i]) == p.vertex(v[j])) continue;
        c = std::min(c, m1.geodesic(p.vertex(v[i]), p.vertex(v[j]), tol));
      }
    }
  };
  same_set(m1);
  same_set(m2);
  return c;
}

double mesh_quality(const Mat2& g, bool* degenerate) {
  const double det = g.determinant();
  if (!(det > 0.0)) {
    if (degenerate) *degenerate = true;
    return kQualityCap;
  }
  if (degenerate) *degenerate = false;
  const double r = g.squaredNorm() / det;
  return 0.25 * r * r;
}

DeformedMeshReport deformed_quality(const CurvedMesh& pb, const std::vector<std::vector<Vec2>>& images) {
  if (images.size() != pb.elements.size()) {
    throw Error(ErrorCode::InvalidArgument, "node images do not match the mesh layout");
  }
  const NodalBasis basis(pb.degree);
  const auto rule = simplex_quadrature(default_quadrature_degree(pb.degree));
  std::vector<std::vector<Jet2>> tab(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) tab[q] = basis.evaluate(rule.points[q]);

  DeformedMeshReport rep;
  rep.nodes = images;
  rep.min_det = kInf;
  for (std::size_t k = 0; k < pb.elements.size(); ++k) {
    const auto& x = pb.elements[k];
    const auto& y = images[k];
    if (y.size() != x.size()) throw Error(ErrorCode::InvalidArgument, "node images do not match the mesh layout");
    ElementQuality eq;
    eq.min_det = kInf;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Mat2 gx = Mat2::Zero();
      Mat2 gy = Mat2::Zero();
      for (std::size_t i = 0; i < x.size(); ++i) {
        const Vec2 g = tab[q][i].grad();
        gx += x[i] * g.transpose();
        gy += y[i] * g.transpose();
      }
      bool deg = false;
      const double qy = mesh_quality(gy, &deg);
      const double qx = mesh_quality(gx);
      eq.q = std::max(eq.q, qy);
      eq.ratio = std::max(eq.ratio, qy / qx);
      eq.min_det = std::min(eq.min_det, gy.determinant() / gx.determinant());
      eq.degenerate = eq.degenerate || deg;
    }
    rep.min_det = std::min(rep.min_det, eq.min_det);
    if (eq.degenerate) ++rep.degenerate_count;
    rep.elements.push_back(eq);
  }
  return rep;
}

}  // namespace regmap
