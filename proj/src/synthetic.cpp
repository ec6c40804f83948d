#include "regmap/synthetic.hpp"

#include "regmap/error.hpp"

#include <cmath>

namespace regmap {

double FrontFamily::value(const Vec2& x, double mu) const { return std::tanh((x.x() - center(mu)) / width); }

Vec2 FrontFamily::gradient(const Vec2& x, double mu) const {
  const double c = std::cosh((x.x() - center(mu)) / width);
  return {1.0 / (width * c * c), 0.0};
}

double WakeFamily::value(const Vec2& x, double mu) const {
  const double th = angle(mu);
  const Vec2 t(std::cos(th), std::sin(th));
  const Vec2 n(-t.y(), t.x());
  const Vec2 d = x - origin;
  const double s = d.dot(t), r = d.dot(n);
  return std::exp(-r * r / (width * width)) * 0.5 * (1.0 + std::tanh(s / ramp));
}

Vec2 WakeFamily::gradient(const Vec2& x, double mu) const {
  const double th = angle(mu);
  const Vec2 t(std::cos(th), std::sin(th));
  const Vec2 n(-t.y(), t.x());
  const Vec2 d = x - origin;
  const double s = d.dot(t), r = d.dot(n);
  const double g = std::exp(-r * r / (width * width));
  const double h = 0.5 * (1.0 + std::tanh(s / ramp));
  const double ch = std::cosh(s / ramp);
  return g * (-2.0 * r / (width * width)) * h * n + g * (0.5 / (ramp * ch * ch)) * t;
}

std::shared_ptr<PolytopeMesh> physical_p1_mesh(const GeometricMap& gm, int levels) {
  const PolytopeMesh fine = refine_uniform(gm.polytope(), levels);
  std::vector<Vec2> v(fine.vertices());
  for (auto& p : v) p = gm.eval(p).y;
  return std::make_shared<PolytopeMesh>(std::move(v), fine.triangles());
}

CurvedMesh physical_curved_mesh(const GeometricMap& gm, int levels, int degree) {
  const PolytopeMesh fine = refine_uniform(gm.polytope(), levels);
  CurvedMesh out = straight_curved_mesh(fine, degree);
  for (auto& el : out.elements)
    for (auto& p : el) p = gm.eval(p).y;
  return out;
}

Eigen::VectorXd vertex_values(const PolytopeMesh& mesh, const std::function<double(const Vec2&)>& f) {
  Eigen::VectorXd out(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) out[i] = f(mesh.vertex(i));
  return out;
}

std::shared_ptr<P1Sensor> p1_sensor(std::shared_ptr<const PolytopeMesh> mesh,
                                    const std::function<double(const Vec2&)>& f) {
  if (!mesh) throw Error(ErrorCode::InvalidArgument, "sensor mesh is null");
  Eigen::VectorXd v = vertex_values(*mesh, f);
  return std::make_shared<P1Sensor>(std::move(mesh), std::move(v));
}

std::vector<Eigen::VectorXd> parameter_grid(int n, double lo, double hi, bool midpoints) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "parameter grid needs at least one point");
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < n; ++i) {
    const double s = midpoints ? (i + 0.5) / n : (n == 1 ? 0.5 : static_cast<double>(i) / (n - 1));
    out.push_back(Eigen::VectorXd::Constant(1, lo + s * (hi - lo)));
  }
  return out;
}

}  // namespace regmap
