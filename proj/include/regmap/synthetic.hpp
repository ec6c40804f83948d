#pragma once

// Parametric field generators with coherent moving features: a translating
// tanh front and a rotating Gaussian wake.

#include "regmap/objective.hpp"

#include <memory>
#include <vector>

namespace regmap {

/// u(x; mu) = tanh((x1 - c(mu)) / w), c(mu) = c0 + c1 mu.
struct FrontFamily {
  double c0 = 0.7;
  double c1 = 0.6;
  double width = 0.12;

  double center(double mu) const { return c0 + c1 * mu; }
  double value(const Vec2& x, double mu) const;
  Vec2 gradient(const Vec2& x, double mu) const;
};

/// Gaussian ridge along the ray from `origin` at angle theta0 + theta1 mu,
/// switched on smoothly past the origin.
struct WakeFamily {
  Vec2 origin{0.4, 0.5};
  double theta0 = -0.3;
  double theta1 = 0.6;
  double width = 0.08;
  double ramp = 0.05;

  double angle(double mu) const { return theta0 + theta1 * mu; }
  double value(const Vec2& x, double mu) const;
  Vec2 gradient(const Vec2& x, double mu) const;
};

/// Psi applied to the vertices of a uniformly refined polytope mesh.
std::shared_ptr<PolytopeMesh> physical_p1_mesh(const GeometricMap& gm, int levels);

/// Degree-k curved mesh with nodes Psi(lattice) on a refined polytope mesh.
CurvedMesh physical_curved_mesh(const GeometricMap& gm, int levels, int degree);

/// Vertex values of f on a P1 mesh.
Eigen::VectorXd vertex_values(const PolytopeMesh& mesh, const std::function<double(const Vec2&)>& f);

std::shared_ptr<P1Sensor> p1_sensor(std::shared_ptr<const PolytopeMesh> mesh,
                                    const std::function<double(const Vec2&)>& f);

/// n equispaced scalar parameters on [lo, hi] (cell midpoints when
/// `midpoints`).
std::vector<Eigen::VectorXd> parameter_grid(int n, double lo, double hi, bool midpoints = false);

}  // namespace regmap
