#pragma once

// Limited-memory BFGS with Armijo backtracking.

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace regmap {

/// Returns f(x) and writes the gradient when `grad` is non-null.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct OptimizerOptions {
  int max_iterations = 500;
  double grad_tol = 1e-8;     ///< on the infinity norm of the gradient
  double rel_f_tol = 0.0;     ///< stop when |f_k - f_{k+1}| <= rel_f_tol * max(1, |f_k|)
  int memory = 10;
  double armijo = 1e-4;
  int max_backtracks = 50;
  double max_step = 0.0;      ///< caps the Euclidean length of a step (0 = none)
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<double> history;  ///< objective after each accepted iterate
};

/// Throws NaNObjective if f(x0) is not finite. Non-finite trial values are
/// rejected by the line search.
OptimizerResult lbfgs(const ObjectiveFn& f, Eigen::VectorXd x0, const OptimizerOptions& options = {});

}  // namespace regmap
