#include "regmap/mesh_morph.hpp"

#include "regmap/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace regmap {

Polyline::Polyline(std::vector<Vec2> points) : pts_(std::move(points)) {
  if (pts_.size() < 2) throw Error(ErrorCode::InvalidArgument, "polyline needs at least two points");
  cum_.assign(pts_.size(), 0.0);
  for (std::size_t i = 1; i < pts_.size(); ++i) cum_[i] = cum_[i - 1] + (pts_[i] - pts_[i - 1]).norm();
  if (!(cum_.back() > 0.0)) throw Error(ErrorCode::InvalidArgument, "polyline has zero length");
}

Polyline Polyline::sample(const CurveFn& f, int n) {
  std::vector<Vec2> pts(n + 1);
  for (int i = 0; i <= n; ++i) pts[i] = f(static_cast<double>(i) / n);
  return Polyline(std::move(pts));
}

Vec2 Polyline::at(double t) const {
  const double s = std::clamp(t, 0.0, 1.0) * cum_.back();
  if (t <= 0.0) return pts_.front();
  if (t >= 1.0) return pts_.back();
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  const std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cum_.begin(), 1), pts_.size() - 1);
  const double len = cum_[i] - cum_[i - 1];
  const double r = len > 0.0 ? (s - cum_[i - 1]) / len : 0.0;
  return (1.0 - r) * pts_[i - 1] + r * pts_[i];
}

Polyline Polyline::reversed() const { return Polyline(std::vector<Vec2>(pts_.rbegin(), pts_.rend())); }

std::vector<int> bind_curves(const PolytopeMesh& pm, std::vector<BoundaryCurve>& curves) {
  const double tol = 1e-10 * pm.diameter();
  std::vector<int> facets;
  for (std::size_t c = 0; c < curves.size(); ++c) {
    auto& bc = curves[c];
    const std::string name = "curve " + std::to_string(c);
    if (bc.edge[0] < 0 || bc.edge[1] < 0 || bc.edge[0] >= pm.num_vertices() || bc.edge[1] >= pm.num_vertices())
      throw Error(ErrorCode::CurveEdgeMismatch, name + ": edge vertex out of range");
    int facet = -1;
    for (int j : pm.boundary_facets()) {
      const auto& f = pm.facet(j);
      if ((f.v[0] == bc.edge[0] && f.v[1] == bc.edge[1]) || (f.v[0] == bc.edge[1] && f.v[1] == bc.edge[0])) facet = j;
    }
    if (facet < 0) throw Error(ErrorCode::CurveEdgeMismatch, name + ": edge is not a boundary facet");
    if (static_cast<int>(bc.curve.points().size()) < Polyline::kMinSamples)
      throw Error(ErrorCode::InvalidArgument, name + ": fewer than 128 samples");
    const auto& f = pm.facet(facet);
    const Vec2& p0 = pm.vertex(f.v[0]);
    const Vec2& p1 = pm.vertex(f.v[1]);
    if ((bc.curve.front() - p1).norm() <= tol && (bc.curve.back() - p0).norm() <= tol) bc.curve = bc.curve.reversed();
    if ((bc.curve.front() - p0).norm() > tol || (bc.curve.back() - p1).norm() > tol)
      throw Error(ErrorCode::CurveEdgeMismatch, name + ": endpoints do not match the edge vertices");
    bc.edge = f.v;
    if (std::find(facets.begin(), facets.end(), facet) != facets.end())
      throw Error(ErrorCode::CurveEdgeMismatch, name + ": edge bound twice");
    facets.push_back(facet);
  }
  return facets;
}

std::vector<PointPair> sample_boundary(const PolytopeMesh& pm, std::vector<BoundaryCurve> curves, int degree) {
  const auto facets = bind_curves(pm, curves);
  const auto t = gauss_lobatto(degree + 1);
  std::vector<PointPair> out;
  out.reserve(t.size() * curves.size());
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const Vec2 g0 = curves[c].curve.front();
    const Vec2 g1 = curves[c].curve.back();
    for (double ti : t) {
      PointPair p;
      p.x = (1.0 - ti) * g0 + ti * g1;
      p.y = curves[c].curve.at(ti);
      p.curve = static_cast<int>(c);
      p.facet = facets[c];
      out.push_back(p);
    }
  }
  return out;
}

namespace {

std::string num(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

struct MorphOps {
  DenseOp grad;     // 4Q x M
  std::vector<double> w;
  DenseOp value;    // 2N x M
  Eigen::VectorXd rhs;
  Eigen::MatrixXd penalty;
  double eps = 0.1;
  double c_exp = 0.025;

  double barrier(const Eigen::VectorXd& a, Eigen::VectorXd* g, double* min_j) const {
    const Eigen::VectorXd d = grad.apply(a);
    Eigen::VectorXd dd;
    if (g) dd = Eigen::VectorXd::Zero(d.size());
    double f = 0.0, jmin = 1e300;
    for (std::size_t q = 0; q < w.size(); ++q) {
      const double u1x = d[4 * q], u1y = d[4 * q + 1], u2x = d[4 * q + 2], u2y = d[4 * q + 3];
      const double j = (1.0 + u1x) * (1.0 + u2y) - u1y * u2x;
      jmin = std::min(jmin, j);
      const double z = (eps - j) / c_exp;
      const double e = std::exp(std::min(z, 40.0));
      f += w[q] * e;
      if (g && z < 40.0) {
        const double s = -w[q] * e / c_exp;
        dd[4 * q] = s * (1.0 + u2y);
        dd[4 * q + 1] = -s * u2x;
        dd[4 * q + 2] = -s * u1y;
        dd[4 * q + 3] = s * (1.0 + u1x);
      }
    }
    if (g) *g = grad.apply_t(dd);
    if (min_j) *min_j = jmin;
    return f;
  }

  double objective(const Eigen::VectorXd& a, Eigen::VectorXd* g) const {
    const Eigen::VectorXd pa = penalty * a;
    double f = barrier(a, g, nullptr) + a.dot(pa);
    if (g) *g += 2.0 * pa;
    return f;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& a) const { return value.apply(a) - rhs; }
};

}  // namespace

MorphResult solve_morph(const PolytopeMesh& pm, std::vector<BoundaryCurve> curves, int degree,
                        const MorphOptions& options) {
  if (degree < 1) throw Error(ErrorCode::OutOfRange, "degree must be >= 1");
  if (!(options.delta > 0.0)) throw Error(ErrorCode::OutOfRange, "delta must be positive");
  const auto facets = bind_curves(pm, curves);
  MorphResult res;
  res.pairs = sample_boundary(pm, curves, degree);

  SpaceOptions sopt;
  sopt.free_facets = facets;
  sopt.sigma_beta = options.sigma_beta;
  sopt.periodic = options.periodic;
  for (int j : facets)
    for (int v : pm.facet(j).v) sopt.fixed_vertices.push_back(v);
  const DisplacementSpace space(pm, degree, sopt);

  MorphOps ops;
  ops.eps = options.eps;
  ops.c_exp = options.c_exp;
  ops.penalty = space.broken_penalty_matrix();
  const auto rule = simplex_quadrature(default_quadrature_degree(degree));
  std::vector<SamplePoint> qp;
  for (int k = 0; k < pm.num_elements(); ++k) {
    const double det = pm.jacobian(k).determinant();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      qp.push_back({k, rule.points[q]});
      ops.w.push_back(rule.weights[q] * det / pm.total_area());
    }
  }
  ops.grad = space.gradient_operator(qp);
  std::vector<SamplePoint> xp;
  ops.rhs.resize(2 * res.pairs.size());
  for (std::size_t j = 0; j < res.pairs.size(); ++j) {
    // Chord points sit on a boundary facet; sample through the owning element.
    const auto& f = pm.facet(res.pairs[j].facet);
    xp.push_back({f.elem[0], pm.to_reference(f.elem[0], res.pairs[j].x)});
    ops.rhs.segment<2>(2 * j) = res.pairs[j].y - res.pairs[j].x;
  }
  ops.value = space.value_operator(xp);

  const int m = space.dim();
  const int nc = static_cast<int>(ops.rhs.size());
  const Eigen::MatrixXd vmat = ops.value.to_matrix();
  const Eigen::MatrixXd vtv = vmat.transpose() * vmat;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
  // Inequalities r_i - delta <= 0 and -r_i - delta <= 0.
  Eigen::VectorXd lam_hi = Eigen::VectorXd::Zero(nc), lam_lo = Eigen::VectorXd::Zero(nc);
  double rho = options.rho0;
  double prev_violation = ops.residual(a).lpNorm<Eigen::Infinity>();
  const double delta = options.delta;
  // Multiplier iterates approach the bound from outside; aim inside it.
  const double bound = 0.5 * delta;

  for (int outer = 0; outer < options.max_outer; ++outer) {
    const auto lagrangian = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
      double f = ops.objective(x, g);
      const Eigen::VectorXd r = ops.residual(x);
      Eigen::VectorXd dr;
      if (g) dr = Eigen::VectorXd::Zero(nc);
      for (int i = 0; i < nc; ++i) {
        const double hi = std::max(0.0, lam_hi[i] + rho * (r[i] - bound));
        const double lo = std::max(0.0, lam_lo[i] + rho * (-r[i] - bound));
        f += (hi * hi - lam_hi[i] * lam_hi[i] + lo * lo - lam_lo[i] * lam_lo[i]) / (2.0 * rho);
        if (g) dr[i] = hi - lo;
      }
      if (g) *g += ops.value.apply_t(dr);
      return f;
    };
    // Preconditioned variables a = L^{-T} c with L L^T = 2P + rho V^T V + shift.
    Eigen::MatrixXd h0 = 2.0 * ops.penalty + rho * vtv;
    h0.diagonal().array() += 1e-10 * std::max(1.0, h0.diagonal().maxCoeff());
    const Eigen::LLT<Eigen::MatrixXd> llt(h0);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NonSPD, "morph preconditioner is not SPD");
    const auto to_a = [&](const Eigen::VectorXd& c) -> Eigen::VectorXd {
      return llt.matrixU().solve(c);
    };
    const auto scaled = [&](const Eigen::VectorXd& c, Eigen::VectorXd* g) {
      Eigen::VectorXd ga;
      const double f = lagrangian(to_a(c), g ? &ga : nullptr);
      if (g) *g = llt.matrixL().solve(ga);
      return f;
    };
    const Eigen::VectorXd c0 = llt.matrixU() * a;
    const auto inner = lbfgs(scaled, c0, options.inner);
    a = to_a(inner.x);
    res.inner_iterations += inner.iterations;
    res.outer_iterations = outer + 1;
    const Eigen::VectorXd r = ops.residual(a);
    const double violation = r.lpNorm<Eigen::Infinity>();
    res.violation_history.push_back(violation);
    res.objective_history.push_back(ops.objective(a, nullptr));
    if (violation <= delta) break;
    for (int i = 0; i < nc; ++i) {
      lam_hi[i] = std::max(0.0, lam_hi[i] + rho * (r[i] - bound));
      lam_lo[i] = std::max(0.0, lam_lo[i] + rho * (-r[i] - bound));
    }
    if (violation > 0.25 * prev_violation) rho *= options.growth;
    prev_violation = violation;
  }

  res.a = a;
  res.final_rho = rho;
  res.max_violation = res.violation_history.empty() ? prev_violation : res.violation_history.back();
  res.objective = ops.objective(a, nullptr);
  ops.barrier(a, nullptr, &res.min_jacobian);

  res.mesh = straight_curved_mesh(pm, degree);
  const Eigen::VectorXd field = space.field(a);
  for (int k = 0; k < pm.num_elements(); ++k) {
    const auto& dofs = space.scalar().element_dofs(k);
    for (std::size_t i = 0; i < dofs.size(); ++i)
      res.mesh.elements[k][i] += Vec2(field[2 * dofs[i]], field[2 * dofs[i] + 1]);
  }
  if (res.max_violation > delta) {
    throw Error(ErrorCode::Infeasible, "boundary constraint violation " + num(res.max_violation) + " above delta " +
                                           num(options.delta) + " after " + std::to_string(res.outer_iterations) +
                                           " outer iterations");
  }
  return res;
}

}  // namespace regmap
