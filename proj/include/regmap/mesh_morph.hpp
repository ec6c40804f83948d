#pragma once

// Curved mesh construction: deform a polytope mesh so that boundary chords
// follow prescribed curves, minimizing f_jac + broken seminorm subject to
// pointwise boundary constraints.

#include "regmap/displacement_space.hpp"
#include "regmap/fixtures.hpp"
#include "regmap/optimizer.hpp"

#include <array>
#include <string>
#include <vector>

namespace regmap {

/// Polyline with chord-length parameter t in [0, 1].
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);
  /// Samples an analytic curve at n + 1 equally spaced parameter values.
  static Polyline sample(const CurveFn& f, int n = 256);

  Vec2 at(double t) const;
  const std::vector<Vec2>& points() const { return pts_; }
  const Vec2& front() const { return pts_.front(); }
  const Vec2& back() const { return pts_.back(); }
  double length() const { return cum_.back(); }
  Polyline reversed() const;

  static constexpr int kMinSamples = 128;

 private:
  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

/// Curve bound to the boundary edge between polytope vertices edge[0], edge[1].
struct BoundaryCurve {
  std::array<int, 2> edge{-1, -1};
  Polyline curve;
};

struct PointPair {
  Vec2 x;          ///< on the straight chord
  Vec2 y;          ///< on the curve
  int curve = -1;
  int facet = -1;
};

/// Boundary facet id of each curve, oriented so that gamma(0) is the first
/// facet endpoint. Throws CurveEdgeMismatch.
std::vector<int> bind_curves(const PolytopeMesh& pm, std::vector<BoundaryCurve>& curves);

/// (degree + 1) Gauss-Lobatto pairs per curve.
std::vector<PointPair> sample_boundary(const PolytopeMesh& pm, std::vector<BoundaryCurve> curves, int degree);

struct MorphOptions {
  double delta = 1e-6;
  double eps = 0.1;
  double c_exp = 0.025;
  double sigma_beta = 10.0;
  double rho0 = 10.0;
  double growth = 10.0;
  int max_outer = 20;
  bool periodic = true;
  OptimizerOptions inner{.max_iterations = 4000, .grad_tol = 1e-8, .memory = 20};
};

struct MorphResult {
  CurvedMesh mesh;
  Eigen::VectorXd a;
  std::vector<PointPair> pairs;
  double objective = 0.0;        ///< f_jac + broken seminorm at the solution
  double max_violation = 0.0;    ///< max_j |Psi(x_j) - y_j|_inf
  double min_jacobian = 0.0;     ///< sampled det(grad Psi)
  int outer_iterations = 0;
  int inner_iterations = 0;
  double final_rho = 0.0;
  std::vector<double> objective_history;
  std::vector<double> violation_history;
};

/// Starts from Psi = id. Throws Infeasible when the violation stays above
/// delta after max_outer rounds.
MorphResult solve_morph(const PolytopeMesh& pm, std::vector<BoundaryCurve> curves, int degree,
                        const MorphOptions& options = {});

}  // namespace regmap
