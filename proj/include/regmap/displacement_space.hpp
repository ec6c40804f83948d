#pragma once

// Continuous degree-k Lagrange space on the polytope mesh, the constrained
// vector displacement space U (phi . n = 0 on the boundary, zero at polytope
// vertices, optional periodic tying), its broken-H2 inner product and the
// orthonormal basis used by the mapping coefficients.

#include "regmap/dense_op.hpp"
#include "regmap/mesh.hpp"

#include <Eigen/Sparse>

#include <functional>

namespace regmap {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Scalar continuous P_k space. Global numbering: polytope vertices, then
/// k - 1 nodes per facet (ordered from facet.v[0] to facet.v[1]), then
/// element-interior nodes.
class ScalarSpace {
 public:
  ScalarSpace(const PolytopeMesh& pm, int degree);

  const PolytopeMesh& mesh() const { return pm_; }
  int degree() const { return basis_.degree(); }
  const NodalBasis& basis() const { return basis_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Vec2>& nodes() const { return nodes_; }
  /// Global dof of local lattice node i of element k.
  const std::vector<int>& element_dofs(int k) const { return element_dofs_[k]; }
  /// Dofs on facet j from facet.v[0] to facet.v[1], endpoints included.
  std::vector<int> facet_dofs(int facet) const;

  /// Nodal interpolant of f.
  Eigen::VectorXd interpolate(const std::function<double(const Vec2&)>& f) const;

 private:
  PolytopeMesh pm_;
  NodalBasis basis_;
  std::vector<Vec2> nodes_;
  std::vector<std::vector<int>> element_dofs_;
};

/// Element sample point (element index and reference coordinates).
struct SamplePoint {
  int element = -1;
  Vec2 xi = Vec2::Zero();
};

struct SpaceOptions {
  /// Boundary facets (facet ids) exempt from the normal constraint.
  std::vector<int> free_facets;
  /// Additional vertices whose displacement is zero.
  std::vector<int> fixed_vertices;
  bool periodic = true;
  double sigma_beta = 10.0;
};

/// Scalar bilinear forms of the broken-H2 inner product.
struct H2Forms {
  SparseMatrix hessian;  ///< sum_k int H(w):H(v)
  SparseMatrix mass;     ///< sum_k int w v
  SparseMatrix jump;     ///< sum_int-facets beta_j int [grad w].[grad v]
  SparseMatrix average;  ///< sum_int-facets beta_j^-1 int {H(w)}:{H(v)}
  std::vector<double> beta;  ///< per facet (0 on boundary facets)

  SparseMatrix inner() const { return hessian + mass + jump + average; }
  SparseMatrix seminorm() const { return hessian + jump + average; }
};

H2Forms assemble_h2_forms(const ScalarSpace& space, double sigma_beta = 10.0);

/// Factor T with T^T G T = I (inverse transpose of the Cholesky factor).
/// Throws NonSPD.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& gram);

class DisplacementSpace {
 public:
  DisplacementSpace(const PolytopeMesh& pm, int degree, SpaceOptions options = {});

  const ScalarSpace& scalar() const { return scalar_; }
  const PolytopeMesh& mesh() const { return scalar_.mesh(); }
  int degree() const { return scalar_.degree(); }
  /// M = number of constrained degrees of freedom.
  int dim() const { return static_cast<int>(transform_.cols()); }
  /// Full vector layout: entry 2 i + c is component c at scalar node i.
  int full_size() const { return 2 * scalar_.size(); }

  const H2Forms& forms() const { return forms_; }
  /// Reduction R: constrained parameters -> full nodal vector.
  const SparseMatrix& reduction() const { return reduction_; }
  /// Gram of the reduced parameterization, R^T (I (x) G) R.
  const Eigen::MatrixXd& reduced_gram() const { return reduced_gram_; }
  /// Orthonormalizing transform T (basis = R T).
  const Eigen::MatrixXd& transform() const { return transform_; }
  /// Full nodal coefficients of the orthonormal basis, one column per phi_i.
  const Eigen::MatrixXd& basis() const { return basis_; }
  /// Seminorm matrices on the orthonormal basis: P(sum a_i phi_i) = a^T P a.
  const Eigen::MatrixXd& penalty_matrix() const { return penalty_; }
  const Eigen::MatrixXd& broken_penalty_matrix() const { return broken_; }

  Eigen::VectorXd field(const Eigen::VectorXd& a) const { return basis_ * a; }
  /// Full nodal interpolant of a vector field.
  Eigen::VectorXd interpolate(const std::function<Vec2(const Vec2&)>& f) const;

  /// Inner product and seminorms of full nodal fields.
  double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  double seminorm_P(const Eigen::VectorXd& u) const;
  double seminorm_P_brkn(const Eigen::VectorXd& u) const;
  /// Facet part (jump + average) of the seminorm, and the jump part alone.
  double facet_terms(const Eigen::VectorXd& u) const;
  double jump_terms(const Eigen::VectorXd& u) const;

  struct Value {
    Vec2 y = Vec2::Zero();
    Mat2 jac = Mat2::Identity();
  };
  /// N_p(a)(x) = x + sum a_i phi_i(x) and its Jacobian. Throws OutsideDomain.
  Value eval_Np(const Eigen::VectorXd& a, const Vec2& x) const;
  Value eval_Np(const Eigen::VectorXd& a, const SamplePoint& p) const;
  /// As above with the physical location of p supplied (no round trip).
  Value eval_Np_at(const Eigen::VectorXd& a, const SamplePoint& p, const Vec2& x) const;
  /// Displacement of a full nodal field at a sample point.
  Vec2 displacement(const Eigen::VectorXd& field, const SamplePoint& p, Mat2* grad = nullptr) const;

  SamplePoint sample(const Vec2& x) const;

  /// Operators mapping coefficients a to displacement values (rows 2p, 2p+1)
  /// and gradients (rows 4p .. 4p+3: du1/dx, du1/dy, du2/dx, du2/dy).
  DenseOp value_operator(const std::vector<SamplePoint>& pts) const;
  DenseOp gradient_operator(const std::vector<SamplePoint>& pts) const;

  /// Number of reduced dofs per scalar node (0, 1 or 2).
  const std::vector<int>& node_dof_count() const { return node_dofs_; }

 private:
  void build_reduction(const SpaceOptions& options);

  ScalarSpace scalar_;
  H2Forms forms_;
  SparseMatrix reduction_;
  Eigen::MatrixXd reduced_gram_;
  Eigen::MatrixXd transform_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd penalty_;
  Eigen::MatrixXd broken_;
  std::vector<int> node_dofs_;
};

}  // namespace regmap
