#pragma once

// Curved triangular meshes, their linearization and the geometric map
// Psi : Omega_p -> Omega built element by element.

#include "regmap/kdtree.hpp"
#include "regmap/reference_element.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace regmap {

struct BoundaryTag {
  int element = 0;
  int local_facet = 0;
  int tag = 0;
};

/// Degree-k curved mesh as stored on disk: per-element lattice node
/// coordinates (library node order), tagged boundary facets and periodic
/// facet pairs (indices into `boundary_facets`).
struct CurvedMesh {
  int degree = 1;
  std::vector<std::vector<Vec2>> elements;
  std::vector<BoundaryTag> boundary_facets;
  std::vector<std::array<int, 2>> periodic_pairs;

  int num_elements() const { return static_cast<int>(elements.size()); }
  int nodes_per_element() const { return lattice_size(degree); }

  /// Checks array shapes and index ranges (InvalidArgument).
  void validate_shape() const;
};

/// Globally numbered nodes of a mesh with per-element lattice numbering.
struct NodeTable {
  std::vector<Vec2> nodes;
  std::vector<std::vector<int>> element_nodes;
};

/// Merges coincident points (distance <= tol). Returns the unique id of each
/// input point; unique ids follow the order of first appearance.
std::vector<int> merge_points(const std::vector<Vec2>& points, double tol, std::vector<Vec2>& unique);

NodeTable build_node_table(const CurvedMesh& mesh);

struct Facet {
  std::array<int, 2> v{-1, -1};  ///< endpoints, oriented as in elem[0] (CCW)
  std::array<int, 2> elem{-1, -1};
  std::array<int, 2> local{-1, -1};
  int tag = -1;  ///< boundary facets only
  double length = 0.0;

  bool boundary() const { return elem[1] < 0; }
};

struct Location {
  int element = -1;
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();
  bool clamped = false;  ///< nearest-element fallback used
};

/// Linear triangle mesh. Used for the polytope mesh T_p, sensor meshes and
/// P1 snapshot meshes.
class PolytopeMesh {
 public:
  PolytopeMesh() = default;

  /// Tags and periodic pairs are optional; when `tags` is empty every
  /// boundary facet gets tag 0. Periodic pairs index into `tags`.
  /// Throws InadmissibleMesh for inverted elements, non-manifold facets,
  /// pinched boundaries or self-intersecting boundaries.
  PolytopeMesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
               const std::vector<BoundaryTag>& tags = {},
               const std::vector<std::array<int, 2>>& periodic = {});

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const { return static_cast<int>(triangles_.size()); }
  int num_facets() const { return static_cast<int>(facets_.size()); }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Vec2& vertex(int i) const { return vertices_[i]; }
  const std::array<int, 3>& triangle(int k) const { return triangles_[k]; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<Facet>& facets() const { return facets_; }
  const Facet& facet(int j) const { return facets_[j]; }
  /// Facet id of local facet e of element k.
  int element_facet(int k, int e) const { return element_facets_[k][e]; }

  const std::vector<int>& interior_facets() const { return interior_; }
  const std::vector<int>& boundary_facets() const { return boundary_; }
  /// Closed chains of boundary facets, domain on the left.
  const std::vector<std::vector<int>>& boundary_loops() const { return loops_; }
  /// Periodic facet pairs (facet ids).
  const std::vector<std::array<int, 2>>& periodic_pairs() const { return periodic_; }
  /// Facet id associated with entry i of the tag list given at construction.
  int tagged_facet(int i) const { return tagged_facets_[i]; }

  bool on_boundary(int v) const { return boundary_in_[v] >= 0; }
  /// Boundary facets ending / starting at boundary vertex v.
  int incoming_facet(int v) const { return boundary_in_[v]; }
  int outgoing_facet(int v) const { return boundary_out_[v]; }

  /// Polytope vertex set V: boundary vertices joining two non-parallel edges.
  bool in_V(int v) const { return in_v_[v]; }
  std::vector<int> polytope_vertices() const;

  /// Affine map x = x0 + A xi of element k.
  const Vec2& origin(int k) const { return x0_[k]; }
  const Mat2& jacobian(int k) const { return a_[k]; }
  const Mat2& inverse_jacobian(int k) const { return ainv_[k]; }
  double area(int k) const { return 0.5 * a_[k].determinant(); }
  double total_area() const { return total_area_; }
  double diameter() const { return diameter_; }
  Vec2 centroid(int k) const;
  Vec2 to_reference(int k, const Vec2& x) const { return ainv_[k] * (x - x0_[k]); }
  Vec2 from_reference(int k, const Vec2& xi) const { return x0_[k] + a_[k] * xi; }

  /// Unit outward normal of a boundary facet.
  Vec2 outward_normal(int facet) const;

  Eigen::Vector3d barycentric(int k, const Vec2& x) const;

  /// Containing element within barycentric tolerance 1e-10; lowest index on
  /// ties. Throws OutsideDomain.
  Location locate(const Vec2& x) const;
  std::optional<Location> try_locate(const Vec2& x) const;
  /// As `locate`, but falls back to the element with the nearest centroid
  /// (unclamped barycentrics, `clamped = true`).
  Location locate_or_nearest(const Vec2& x) const;

  const std::vector<int>& vertex_elements(int v) const { return vertex_elements_[v]; }

  static constexpr double kLocateTol = 1e-10;

 private:
  void build_topology(const std::vector<BoundaryTag>& tags, const std::vector<std::array<int, 2>>& periodic);
  void build_boundary();
  void check_boundary_simple() const;
  bool contains(int k, const Vec2& x, Eigen::Vector3d& bary) const;

  std::vector<Vec2> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Facet> facets_;
  std::vector<std::array<int, 3>> element_facets_;
  std::vector<int> interior_;
  std::vector<int> boundary_;
  std::vector<std::vector<int>> loops_;
  std::vector<std::array<int, 2>> periodic_;
  std::vector<int> tagged_facets_;
  std::vector<int> boundary_in_;
  std::vector<int> boundary_out_;
  std::vector<bool> in_v_;
  std::vector<Vec2> x0_;
  std::vector<Mat2> a_;
  std::vector<Mat2> ainv_;
  std::vector<std::vector<int>> vertex_elements_;
  double total_area_ = 0.0;
  double diameter_ = 0.0;
  KdTree centroids_;
};

/// Degree-k curved mesh whose nodes sit on the affine images of the lattice
/// (Psi = id).
CurvedMesh straight_curved_mesh(const PolytopeMesh& pm, int degree);

struct BoundaryPoint {
  int facet = -1;     ///< polytope boundary facet id
  double t = 0.0;     ///< curve parameter in [0, 1]
  int loop = -1;
  double s = 0.0;     ///< arc-length position along the loop
  double distance = 0.0;
};

struct AdmissibilityReport {
  bool admissible = true;
  std::vector<std::string> violations;
  double min_jacobian = 0.0;
  double max_vertex_error = 0.0;
  double max_straight_facet_normal_error = 0.0;
  double max_straight_facet_pointwise_error = 0.0;
  int num_polytope_vertices = 0;
  int num_angular_points = 0;
  int num_fictitious_vertices = 0;
};

struct GeometricMapOptions {
  /// Throw InadmissibleMesh when the admissibility check fails.
  bool strict = true;
  /// Tangent jump (rad) above which a boundary vertex is an angular point.
  /// Degree-k boundaries are only C0 at vertices, so coarse meshes of smooth
  /// curves need a looser value.
  double angle_tol = 1e-6;
};

/// Psi restricted to D_{k,p} is Psi_k o Psi_{k,p}^{-1}.
class GeometricMap {
 public:
  explicit GeometricMap(CurvedMesh mesh, GeometricMapOptions options = {});

  const CurvedMesh& curved() const { return curved_; }
  const PolytopeMesh& polytope() const { return poly_; }
  const NodalBasis& basis() const { return basis_; }
  int degree() const { return curved_.degree; }
  double diameter() const { return poly_.diameter(); }

  struct Value {
    Vec2 y = Vec2::Zero();
    Mat2 grad = Mat2::Identity();
    int element = -1;
  };

  Value eval(const Vec2& x) const;
  /// Evaluates the element-k polynomial at x (extrapolates outside D_{k,p}).
  Value eval_in(int k, const Vec2& x) const;
  /// Psi_k and its reference gradient at reference point xi.
  Value eval_reference(int k, const Vec2& xi) const;

  struct Inverse {
    Vec2 x = Vec2::Zero();
    int element = -1;
    int iterations = 0;
  };

  Inverse invert(const Vec2& y) const;
  /// Newton on a single element; nullopt when the iteration fails or the
  /// converged point lies outside the element.
  std::optional<Inverse> invert_in(int k, const Vec2& y) const;

  bool is_identity() const { return identity_; }
  bool straight_facet(int facet) const { return straight_[facet]; }
  bool angular(int v) const { return angular_[v]; }
  /// Polytope vertices that are not angular points of the boundary.
  std::vector<int> fictitious_vertices() const;

  /// Nearest point on the curved boundary.
  BoundaryPoint project_to_boundary(const Vec2& x) const;
  double distance_to_boundary(const Vec2& x) const { return project_to_boundary(x).distance; }
  /// Arc length along the boundary, +inf across angular points or loops.
  /// Throws PointNotOnBoundary beyond `tol` (default 1e-8 diam).
  double geodesic(const Vec2& x, const Vec2& y, double tol = -1.0) const;

  /// Curve point and derivative on a boundary facet, t in [0, 1].
  Vec2 facet_curve(int facet, double t, Vec2* tangent = nullptr, Vec2* second = nullptr) const;

  double min_jacobian(int quad_degree = -1) const;
  AdmissibilityReport check() const;

  static constexpr int kPolylineSegments = 128;
  static constexpr int kMaxNewton = 25;

 private:
  struct Polyline {
    std::vector<Vec2> pts;
    std::vector<double> cum;
  };

  void build_boundary_geometry();
  double arc_position(int facet, double t) const;

  CurvedMesh curved_;
  NodalBasis basis_;
  PolytopeMesh poly_;
  std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> nodes_;
  std::vector<std::array<Vec2, 2>> bbox_;
  KdTree curved_centroids_;
  bool identity_ = false;
  std::vector<bool> straight_;
  std::vector<bool> angular_;
  std::vector<Polyline> polylines_;        // per facet (boundary only)
  std::vector<int> facet_loop_;
  std::vector<double> facet_offset_;
  std::vector<double> loop_length_;
  std::vector<std::vector<double>> loop_angular_;
};

/// Minimum of the three distances bounding boundary deformations that a
/// two-layer composition can represent.
double constant_C(const GeometricMap& m1, const GeometricMap& m2);

/// q(G) = (1/4) (|G|_F^2 / det(G)_+)^2 for d = 2; `kQualityCap` when
/// det(G) <= 0.
double mesh_quality(const Mat2& g, bool* degenerate = nullptr);
inline constexpr double kQualityCap = 1e12;

struct ElementQuality {
  double q = 0.0;          ///< max over quadrature points
  double ratio = 0.0;      ///< max over quadrature points of q(Phi) / q(id)
  double min_det = 0.0;    ///< of the deformed element map
  bool degenerate = false;
};

struct DeformedMeshReport {
  std::vector<std::vector<Vec2>> nodes;
  std::vector<ElementQuality> elements;
  double min_det = 0.0;
  int degenerate_count = 0;
};

/// Quality of `pb` after moving its nodes to `images` (same layout).
DeformedMeshReport deformed_quality(const CurvedMesh& pb, const std::vector<std::vector<Vec2>>& images);

}  // namespace regmap
