#pragma once

// Lagrangian model reduction on P1 snapshot meshes: map snapshots to the
// reference configuration, POD with a lumped-mass inner product, RBF
// regression of the coefficients and L2 error metrics.

#include "regmap/registration.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace regmap {

using PointMap = std::function<Vec2(const Vec2&)>;

struct SnapshotSet {
  std::shared_ptr<const PolytopeMesh> mesh;
  std::vector<Eigen::VectorXd> params;
  Eigen::MatrixXd values;  ///< nodes x parameters

  int size() const { return static_cast<int>(values.cols()); }
  /// Throws InvalidArgument on inconsistent sizes.
  void validate() const;
};

struct MappedField {
  Eigen::VectorXd values;
  int clamped = 0;  ///< node images located by the nearest-element fallback
};

/// u(phi(node)) by P1 interpolation.
MappedField map_snapshot(const PolytopeMesh& mesh, const Eigen::VectorXd& u, const PointMap& phi);

Eigen::VectorXd lumped_mass(const PolytopeMesh& mesh);
SparseMatrix consistent_mass(const PolytopeMesh& mesh);
/// Consistent 1D mass of the boundary edges (zero rows for interior nodes).
SparseMatrix boundary_mass(const PolytopeMesh& mesh);

/// ||truth - approx||_M / ||truth||_M (absolute error when truth vanishes).
double relative_error(const SparseMatrix& mass, const Eigen::VectorXd& truth, const Eigen::VectorXd& approx);

/// POD with the weighted inner product sum_i w_i u_i v_i.
class SolutionPod {
 public:
  SolutionPod() = default;
  SolutionPod(const Eigen::MatrixXd& snapshots, const Eigen::VectorXd& weights);

  int rank() const { return static_cast<int>(modes_.cols()); }
  const Eigen::MatrixXd& modes() const { return modes_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  Eigen::VectorXd coefficients(const Eigen::VectorXd& u, int n) const;
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& coef) const;
  Eigen::VectorXd project(const Eigen::VectorXd& u, int n) const { return reconstruct(coefficients(u, n)); }

 private:
  Eigen::MatrixXd modes_;
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd weights_;
};

struct RomErrors {
  std::vector<int> n;
  std::vector<double> e_max;
  std::vector<double> e_max_bnd;
};

struct RomComparison {
  RomErrors registered_projection;
  RomErrors unmapped_projection;
  RomErrors registered_regression;
  RomErrors unmapped_regression;
  int clamped = 0;
};

/// Registration maps for the training and test parameters. Both pipelines
/// use the same snapshots; `n_max` caps the POD sizes reported.
struct RomProblem {
  SnapshotSet train;
  SnapshotSet test;
  std::vector<std::shared_ptr<const CompositeMap>> train_maps;
  std::vector<std::shared_ptr<const CompositeMap>> test_maps;
  int n_max = 6;
  RbfOptions rbf;
  int threads = 1;
};

RomComparison compare_roms(const RomProblem& problem);

/// CSV with header n,E_max,E_max_bnd.
std::string errors_csv(const RomErrors& errors);

}  // namespace regmap
