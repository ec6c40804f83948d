#pragma once

// Run configuration for the `regmap` driver: file paths plus the full
// hyperparameter table. Unknown keys and out-of-range values are rejected
// with the offending field path.

#include "regmap/mesh_morph.hpp"
#include "regmap/registration.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace regmap {

struct RunPaths {
  std::string mesh;            ///< curved mesh JSON (defines Psi)
  std::string quality_mesh;    ///< curved mesh JSON for f_msh (empty: Psi-mapped refinement)
  std::string sensors;         ///< training sensor manifest
  std::string snapshots;       ///< ROM training snapshot manifest
  std::string test_snapshots;  ///< ROM test snapshot manifest
  std::string state;           ///< registration state JSON
  std::string output = "out";
};

struct RunConfig {
  RunPaths paths;

  // Displacement space and geometry.
  int degree = 3;
  int quad_degree = -1;        ///< -1: 2 degree + 2
  double sigma_beta = 10.0;
  double angle_tol = 1e-6;
  bool periodic = true;
  int quality_refine = 1;
  int quality_degree = 2;

  // Objective.
  double kappa_msh = 10.0;
  double eps = 0.1;
  double c_exp = 0.025;
  double xi = 1.0;
  bool use_jac = true;
  bool use_msh = true;
  bool use_smooth = true;
  double distributed_weight = 1.0;
  double pointset_weight = -1.0;  ///< -1: 1/N

  // Greedy loop.
  int n0 = 1;
  int n_max = 6;
  double tol = 1e-4;
  bool tol_relative = false;  ///< tol times the squared L2 norm of the first template
  double tol_pod = 5e-3;
  double c_inf = 10.0;
  std::string ordering = "farthest";
  std::vector<Eigen::VectorXd> initial_params;  ///< empty: chosen from the training set
  int max_iterations = 500;
  double grad_tol = 1e-8;

  // Regression.
  double r_min = 0.70;
  double split = 0.8;
  std::uint64_t seed = 20240611;

  // Morphing.
  double delta = 1e-6;
  int max_outer = 20;

  // ROM.
  int rom_n_max = 6;

  PenaltyConfig penalty() const;
  SpaceOptions space_options() const;
  GreedyOptions greedy_options(int threads) const;
  RbfOptions rbf_options() const;
  MorphOptions morph_options() const;
  OrderingRule ordering_rule() const;
};

/// Throws UnknownKey / OutOfRange naming the field path (e.g. "paths.mesh").
RunConfig parse_config(const nlohmann::json& j);
/// Reads and validates a config file. Parse failures are InvalidArgument.
RunConfig validate_config(const std::string& path);
/// Fully resolved configuration (every field, defaults included).
nlohmann::json to_json(const RunConfig& config);

}  // namespace regmap
