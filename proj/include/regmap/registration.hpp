#pragma once

// Single-parameter registration, POD of mapping coefficients, the greedy
// template loop, RBF generalization and the resulting parametric map.

#include "regmap/objective.hpp"
#include "regmap/optimizer.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace regmap {

// ---------------------------------------------------------------------------
// Compositional maps

/// Phi = Psi o N_p(a) o Psi^{-1} for full coefficients a (length M).
class CompositeMap {
 public:
  CompositeMap(const GeometricMap& gm, const DisplacementSpace& space, Eigen::VectorXd a);

  const Eigen::VectorXd& coefficients() const { return a_; }
  const GeometricMap& geometric_map() const { return *gm_; }

  /// Phi(x) and optionally its Jacobian.
  Vec2 eval(const Vec2& x, Mat2* jac = nullptr) const;
  /// N_p(a) on Omega_p.
  Vec2 eval_p(const Vec2& z, Mat2* jac = nullptr) const;
  /// N_p(a)^{-1} by damped Newton. Throws NoConvergence.
  Vec2 invert_p(const Vec2& z) const;
  /// Phi^{-1}(y).
  Vec2 invert(const Vec2& y) const;
  /// Minimum of det(I + grad u) at the degree-q quadrature points of T_p.
  double min_jacobian_p(int quad_degree = -1) const;

 private:
  const GeometricMap* gm_;
  const DisplacementSpace* space_;
  Eigen::VectorXd a_;
  Eigen::VectorXd field_;
};

/// N_1 o N_2 o ... o N_l (the last layer is applied first).
class MultiLayerMap {
 public:
  void push_back(CompositeMap layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }
  Vec2 eval(const Vec2& x, Mat2* jac = nullptr) const;
  Vec2 invert(const Vec2& y) const;

 private:
  std::vector<CompositeMap> layers_;
};

// ---------------------------------------------------------------------------
// Single solve

struct SolveResult {
  Eigen::VectorXd b;        ///< reduced coefficients a*
  double target = 0.0;      ///< f_tg at a*
  double objective = 0.0;   ///< full objective at a*
  double initial_objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::size_t flagged = 0;
  std::string error;        ///< non-empty when the solve aborted
  std::vector<double> history;
};

/// Minimizes b -> f_obj(W b) from b0.
SolveResult solve_single(const ReducedOperators& ops, const TargetSpec& target, const Eigen::VectorXd& b0,
                         const OptimizerOptions& options = {});

// ---------------------------------------------------------------------------
// POD

struct PodResult {
  Eigen::MatrixXd w;              ///< M x m, orthonormal columns
  Eigen::VectorXd eigenvalues;    ///< of the Gramian, descending
  int m = 0;
  Eigen::MatrixXd projected;      ///< m x K, W^T snapshots
};

/// m = min{m': sum_{j<=m'} lambda_j >= (1 - tol) sum lambda}.
int energy_rank(const Eigen::VectorXd& eigenvalues_desc, double tol);

/// Method of snapshots with the Euclidean inner product; columns of
/// `snapshots` are the coefficient vectors.
PodResult pod(const Eigen::MatrixXd& snapshots, double tol_pod);

// ---------------------------------------------------------------------------
// Ordering of the first greedy iteration

enum class OrderingRule {
  Farthest,  ///< next = argmax over remaining of the distance to the ordered set
  Nearest,   ///< next = argmin over remaining of the distance to the ordered set
};

struct Ordering {
  std::vector<int> order;       ///< parameter indices mu^(1), mu^(2), ...
  std::vector<int> neighbor;    ///< per position k: position ne_k (-1 for k = 0)
};

Ordering order_parameters(const std::vector<Eigen::VectorXd>& params, const Eigen::VectorXd& mu_star,
                          OrderingRule rule = OrderingRule::Farthest);

// ---------------------------------------------------------------------------
// Greedy loop

struct GreedyOptions {
  int n_max = 6;
  double tol = 1e-4;
  double tol_pod = 5e-3;
  double c_inf = 10.0;
  OrderingRule ordering = OrderingRule::Farthest;
  OptimizerOptions optimizer;
  int threads = 1;
};

struct GreedyProblem {
  const RegistrationContext* context = nullptr;
  std::vector<Eigen::VectorXd> params;
  std::vector<std::shared_ptr<const Sensor>> sensors;       ///< per training parameter (optional)
  std::vector<std::vector<Vec2>> pointsets;                 ///< per training parameter (optional)
  double pointset_weight = -1.0;
  double distributed_weight = 1.0;
  /// Initial templates S_{n0}: parameters and sensors, evaluated unmapped.
  std::vector<Eigen::VectorXd> initial_params;
  std::vector<std::shared_ptr<const Sensor>> initial_sensors;
};

struct BoxCheck {
  int index = -1;
  int neighbor = -1;
  double lhs = 0.0;   ///< |a_k - a_ne|_inf
  double rhs = 0.0;   ///< C_inf |mu_k - mu_ne|
  bool ok = true;
};

struct GreedyIteration {
  int n = 0;
  int m = 0;
  double max_target = 0.0;
  int argmax = -1;
  std::vector<double> targets;
  std::vector<int> iterations;
};

struct GreedyResult {
  TemplateSpace templates;
  std::vector<Eigen::VectorXd> selected_params;
  std::vector<int> selected_indices;      ///< training index, -1 for unmapped initial templates
  Eigen::MatrixXd w;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd reduced;                ///< m x K projected coefficients (final W)
  Eigen::MatrixXd full;                   ///< M x K coefficients W_old a*
  std::vector<double> targets;            ///< f* per training parameter
  std::vector<double> unmapped_targets;   ///< f_tg(0) with the final template space
  std::vector<std::string> errors;        ///< per parameter (empty when fine)
  std::vector<bool> line_search_failed;
  std::vector<BoxCheck> box;
  Ordering ordering;
  std::vector<GreedyIteration> history;
  bool converged = false;
  int n = 0;

  double max_target() const;
  bool box_ok() const;
};

GreedyResult greedy(const GreedyProblem& problem, const GreedyOptions& options = {});

/// Target value at full coefficients a with the given templates.
double evaluate_target(const RegistrationContext& ctx, const TargetSpec& target, const Eigen::VectorXd& a_full);

// ---------------------------------------------------------------------------
// RBF regression

struct RbfOptions {
  double split = 0.8;
  double r_min = 0.7;
  std::uint64_t seed = 20240611;
};

/// Cubic RBF (r^3) with a linear polynomial tail on parameters scaled to the
/// unit box, fitted on a seeded learning split; modes with out-of-sample
/// R^2 < r_min predict the learning-set mean.
class RbfModel {
 public:
  RbfModel() = default;
  /// `values` is K x m (one row per site).
  static RbfModel fit(const std::vector<Eigen::VectorXd>& sites, const Eigen::MatrixXd& values,
                      const RbfOptions& options = {});

  Eigen::VectorXd predict(const Eigen::VectorXd& mu) const;
  int modes() const { return static_cast<int>(r2_.size()); }
  const std::vector<double>& r2() const { return r2_; }
  const std::vector<bool>& retained() const { return retained_; }
  const Eigen::VectorXd& fallback() const { return mean_; }
  const std::vector<int>& learning() const { return learn_; }
  const std::vector<int>& testing() const { return test_; }
  bool degenerate() const { return degenerate_; }

  /// Serialization helpers.
  const std::vector<Eigen::VectorXd>& centers() const { return centers_; }
  const Eigen::MatrixXd& weights() const { return coef_; }
  const Eigen::VectorXd& lower() const { return lo_; }
  const Eigen::VectorXd& scale() const { return scale_; }
  static RbfModel from_parts(std::vector<Eigen::VectorXd> centers, Eigen::MatrixXd coef, Eigen::VectorXd lo,
                             Eigen::VectorXd scale, Eigen::VectorXd mean, std::vector<double> r2,
                             std::vector<bool> retained);

 private:
  Eigen::VectorXd scaled(const Eigen::VectorXd& mu) const;
  Eigen::VectorXd raw(const Eigen::VectorXd& mu) const;

  std::vector<Eigen::VectorXd> centers_;   // scaled learning sites
  Eigen::MatrixXd coef_;                   // (L + P + 1) x m
  Eigen::VectorXd lo_, scale_;
  Eigen::VectorXd mean_;
  std::vector<double> r2_;
  std::vector<bool> retained_;
  std::vector<int> learn_, test_;
  bool degenerate_ = false;
};

/// Out-of-sample R^2 with the convention R^2 = 1 when residual and variance
/// both vanish.
double r_squared(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);

/// Phi_mu = N(W a_hat(mu)).
class ParametricMap {
 public:
  ParametricMap(const GeometricMap& gm, const DisplacementSpace& space, RbfModel model, Eigen::MatrixXd w);

  Eigen::VectorXd reduced(const Eigen::VectorXd& mu) const { return model_.predict(mu); }
  Eigen::VectorXd coefficients(const Eigen::VectorXd& mu) const;
  CompositeMap at(const Eigen::VectorXd& mu) const;
  const RbfModel& model() const { return model_; }
  const Eigen::MatrixXd& w() const { return w_; }

 private:
  const GeometricMap* gm_;
  const DisplacementSpace* space_;
  RbfModel model_;
  Eigen::MatrixXd w_;
};

}  // namespace regmap
