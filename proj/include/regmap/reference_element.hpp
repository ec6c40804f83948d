#pragma once

// Master-triangle machinery on D = {x, y > 0, x + y < 1}.
//
// Node ordering for the regular lattice of degree k (fixed for the whole
// library, including the mesh file format):
//   1. vertices (0,0), (1,0), (0,1);
//   2. edge nodes, counter-clockwise: edge 0 from vertex 0 to vertex 1,
//      edge 1 from vertex 1 to vertex 2, edge 2 from vertex 2 to vertex 0,
//      each listed in the direction of travel;
//   3. interior nodes, row by row (increasing y), left to right.
// Local facet e of a triangle joins local vertices e and (e + 1) % 3.

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace regmap {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Value, gradient and Hessian of a bivariate function at one point.
struct Jet2 {
  double v = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double dxx = 0.0;
  double dxy = 0.0;
  double dyy = 0.0;

  Vec2 grad() const { return {dx, dy}; }
  Mat2 hessian() const {
    Mat2 h;
    h << dxx, dxy, dxy, dyy;
    return h;
  }
};

Jet2 operator+(const Jet2& a, const Jet2& b);
Jet2 operator-(const Jet2& a, const Jet2& b);
Jet2 operator*(const Jet2& a, const Jet2& b);
Jet2 operator*(double s, const Jet2& a);

/// Number of lattice nodes (k + 1)(k + 2) / 2.
int lattice_size(int degree);

/// Regular lattice {(i/k, j/k): i + j <= k} in the documented order.
std::vector<Vec2> lattice_nodes(int degree);

/// Local lattice indices of the nodes on facet `local_facet`, ordered from
/// vertex `local_facet` to vertex `(local_facet + 1) % 3` (endpoints included).
std::vector<int> facet_node_indices(int degree, int local_facet);

/// Maps t in [0,1] along local facet e to reference coordinates.
Vec2 facet_point(int local_facet, double t);

struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Gauss-Jacobi rule on [-1, 1] for the weight (1 - s)^alpha (1 + s)^beta.
LineRule gauss_jacobi(int n, double alpha, double beta);

/// Gauss-Legendre rule with n points on [0, 1].
LineRule gauss_legendre_unit(int n);

/// Gauss-Lobatto points on [0, 1] (n >= 2), endpoints included.
std::vector<double> gauss_lobatto(int n);

struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
  int degree = 0;  ///< polynomial exactness degree

  std::size_t size() const { return points.size(); }
};

/// Collapsed-coordinate rule on D exact for total degree >= q.
QuadratureRule simplex_quadrature(int q);

/// Default assembly exactness degree for a degree-k discretization.
inline int default_quadrature_degree(int degree) { return 2 * degree + 2; }

/// Orthonormal (Koornwinder/Dubiner) modal basis on D, evaluated with
/// second derivatives through polynomial recurrences that stay regular at the
/// collapsed vertex.
class ModalBasis {
 public:
  explicit ModalBasis(int degree);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(scale_.size()); }

  /// Jets of every mode at `xi`; `out.size() == size()`.
  void evaluate(const Vec2& xi, std::span<Jet2> out) const;

  /// Mode (i, j) ordering: index for i + j <= k, i outer.
  const std::vector<std::array<int, 2>>& indices() const { return index_; }

 private:
  void evaluate_unscaled(const Vec2& xi, std::span<Jet2> out) const;

  int degree_;
  std::vector<std::array<int, 2>> index_;
  std::vector<double> scale_;
};

/// Nodal Lagrange basis on the regular lattice, represented through the
/// modal basis and the inverse generalized Vandermonde matrix.
class NodalBasis {
 public:
  explicit NodalBasis(int degree);

  int degree() const { return modal_.degree(); }
  int size() const { return modal_.size(); }
  const std::vector<Vec2>& nodes() const { return nodes_; }
  const ModalBasis& modal() const { return modal_; }

  /// V(r, m) = psi_m(node_r).
  const Eigen::MatrixXd& vandermonde() const { return vandermonde_; }

  /// Jets of all Lagrange functions at `xi`. Values snap to the exact
  /// Kronecker delta within 1e-13 of a reference vertex.
  void evaluate(const Vec2& xi, std::span<Jet2> out) const;
  std::vector<Jet2> evaluate(const Vec2& xi) const;

  /// Values only.
  void values(const Vec2& xi, std::span<double> out) const;

 private:
  ModalBasis modal_;
  std::vector<Vec2> nodes_;
  Eigen::MatrixXd vandermonde_;
  Eigen::MatrixXd inverse_;  // inverse_(m, r): coefficient of psi_m in l_r
};

}  // namespace regmap
