#include "regmap/objective.hpp"

#include "regmap/error.hpp"
#include "regmap/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace regmap {

void PenaltyConfig::validate() const {
  auto bad = [](const char* field, const std::string& why) {
    throw Error(ErrorCode::OutOfRange, std::string(field) + ": " + why);
  };
  if (!(eps > 0.0) || !std::isfinite(eps)) bad("eps", "must be positive");
  if (!(c_exp > 0.0) || !(c_exp < eps)) bad("c_exp", "must satisfy 0 < c_exp < eps");
  if (!(kappa_msh > 0.0) || !std::isfinite(kappa_msh)) bad("kappa_msh", "must be positive");
  if (!(xi >= 0.0) || !std::isfinite(xi)) bad("xi", "must be non-negative");
}

PolytopeQuadrature polytope_quadrature(const GeometricMap& gm, int degree) {
  const auto& pm = gm.polytope();
  const auto rule = simplex_quadrature(degree);
  PolytopeQuadrature q;
  const std::size_t n = pm.num_elements() * rule.size();
  q.points.reserve(n);
  q.x.reserve(n);
  q.weights.reserve(n);
  q.psi_jacobian.reserve(n);
  for (int k = 0; k < pm.num_elements(); ++k) {
    const double det_a = pm.jacobian(k).determinant();
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const Vec2& xi = rule.points[i];
      q.points.push_back({k, xi});
      q.x.push_back(pm.from_reference(k, xi));
      q.weights.push_back(rule.weights[i] * det_a);
      q.psi_jacobian.push_back(gm.eval_reference(k, xi).grad.determinant() / det_a);
      q.area += q.weights.back();
    }
  }
  return q;
}

GeometricMap::Value eval_psi_clamped(const GeometricMap& gm, const Vec2& x, bool* clamped) {
  const auto& pm = gm.polytope();
  if (auto loc = pm.try_locate(x)) {
    if (clamped) *clamped = false;
    return gm.eval_in(loc->element, x);
  }
  const Location near = pm.locate_or_nearest(x);
  if (clamped) *clamped = true;
  return gm.eval_in(near.element, x);
}

SamplePoint psi_preimage(const GeometricMap& gm, const Vec2& y, Vec2* x) {
  GeometricMap::Inverse inv;
  try {
    inv = gm.invert(y);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::OutsideDomain && e.code() != ErrorCode::NoConvergence) throw;
    const BoundaryPoint bp = gm.project_to_boundary(y);
    if (bp.distance > 1e-6 * gm.diameter()) throw;
    inv = gm.invert(gm.facet_curve(bp.facet, bp.t));
  }
  if (x) *x = inv.x;
  return {inv.element, gm.polytope().to_reference(inv.element, inv.x)};
}

// ---------------------------------------------------------------------------

P1Sensor::P1Sensor(std::shared_ptr<const PolytopeMesh> mesh, Eigen::VectorXd values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (!mesh_) throw Error(ErrorCode::InvalidArgument, "sensor mesh is null");
  if (values_.size() != mesh_->num_vertices()) {
    throw Error(ErrorCode::InvalidArgument, "sensor has " + std::to_string(values_.size()) + " values for " +
                                                std::to_string(mesh_->num_vertices()) + " vertices");
  }
  if (!values_.allFinite()) throw Error(ErrorCode::InvalidArgument, "sensor values must be finite");
  grad_basis_.resize(mesh_->num_elements());
  for (int k = 0; k < mesh_->num_elements(); ++k) grad_basis_[k] = mesh_->inverse_jacobian(k);
}

SensorValue P1Sensor::eval(const Vec2& x) const {
  SensorValue out;
  Location loc;
  if (auto l = mesh_->try_locate(x)) {
    loc = *l;
  } else {
    loc = mesh_->locate_or_nearest(x);
    out.clamped = true;
  }
  const auto& t = mesh_->triangle(loc.element);
  const Eigen::Vector3d bary = mesh_->barycentric(loc.element, x);
  const double v0 = values_[t[0]], v1 = values_[t[1]], v2 = values_[t[2]];
  out.value = bary[0] * v0 + bary[1] * v1 + bary[2] * v2;
  // Rows of A^{-1} are the gradients of lambda_1 and lambda_2.
  const Mat2& ainv = grad_basis_[loc.element];
  out.grad = ainv.transpose() * Vec2(v1 - v0, v2 - v0);
  return out;
}

PolytopeMesh refine_uniform(const PolytopeMesh& pm, int levels) {
  std::vector<Vec2> verts = pm.vertices();
  std::vector<std::array<int, 3>> tris = pm.triangles();
  for (int l = 0; l < levels; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      verts.push_back(0.5 * (verts[a] + verts[b]));
      const int id = static_cast<int>(verts.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(4 * tris.size());
    for (const auto& t : tris) {
      const int ab = midpoint(t[0], t[1]);
      const int bc = midpoint(t[1], t[2]);
      const int ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({ab, t[1], bc});
      next.push_back({ca, bc, t[2]});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  return PolytopeMesh(std::move(verts), std::move(tris));
}

TemplateSpace::TemplateSpace(std::vector<double> weights) : weights_(std::move(weights)) {
  sqrt_w_.resize(weights_.size());
  for (std::size_t q = 0; q < weights_.size(); ++q) {
    if (!(weights_[q] >= 0.0)) throw Error(ErrorCode::InvalidArgument, "template weights must be non-negative");
    sqrt_w_[q] = std::sqrt(weights_[q]);
  }
  values_.resize(weights_.size(), 0);
}

void TemplateSpace::add(const Eigen::VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(weights_.size())) {
    throw Error(ErrorCode::InvalidArgument, "template has the wrong number of quadrature values");
  }
  if (!values.allFinite()) throw Error(ErrorCode::InvalidArgument, "template values must be finite");
  if ((sqrt_w_.array() * values.array()).matrix().norm() == 0.0) {
    throw Error(ErrorCode::InvalidArgument, "zero template");
  }
  values_.conservativeResize(Eigen::NoChange, values_.cols() + 1);
  values_.col(values_.cols() - 1) = values;
  cod_.compute(sqrt_w_.asDiagonal() * values_);
}

Eigen::VectorXd TemplateSpace::coefficients(const Eigen::VectorXd& s) const {
  if (size() == 0) return Eigen::VectorXd();
  return cod_.solve(Eigen::VectorXd(sqrt_w_.array() * s.array()));
}

double TemplateSpace::residual(const Eigen::VectorXd& s, Eigen::VectorXd* r) const {
  if (s.size() != static_cast<Eigen::Index>(weights_.size())) {
    throw Error(ErrorCode::InvalidArgument, "sensor vector has the wrong number of quadrature values");
  }
  Eigen::VectorXd res = s;
  if (size() > 0) res -= values_ * coefficients(s);
  double f = 0.0;
  for (Eigen::Index q = 0; q < res.size(); ++q) f += weights_[q] * res[q] * res[q];
  if (r) *r = std::move(res);
  return f;
}

// ---------------------------------------------------------------------------

QualityMesh make_quality_mesh(const GeometricMap& gm, CurvedMesh pb) {
  pb.validate_shape();
  QualityMesh out;
  out.table = build_node_table(pb);
  const std::size_t nn = out.table.nodes.size();
  out.preimages.resize(nn);
  out.preimage_x.resize(nn);
  for (std::size_t i = 0; i < nn; ++i) out.preimages[i] = psi_preimage(gm, out.table.nodes[i], &out.preimage_x[i]);

  const NodalBasis basis(pb.degree);
  const auto rule = simplex_quadrature(default_quadrature_degree(pb.degree));
  out.quad_weights = rule.weights;
  out.grads.resize(rule.size());
  std::vector<Jet2> jets(basis.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    basis.evaluate(rule.points[q], jets);
    out.grads[q].resize(basis.size());
    for (int l = 0; l < basis.size(); ++l) out.grads[q][l] = jets[l].grad();
  }
  out.q_id.resize(pb.num_elements());
  out.element_area.assign(pb.num_elements(), 0.0);
  for (int k = 0; k < pb.num_elements(); ++k) {
    out.q_id[k].resize(rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Mat2 g = Mat2::Zero();
      for (int l = 0; l < basis.size(); ++l) g += pb.elements[k][l] * out.grads[q][l].transpose();
      const double det = g.determinant();
      if (!(det > 0.0)) {
        throw Error(ErrorCode::InadmissibleMesh, "quality mesh element " + std::to_string(k) + " is inverted");
      }
      out.q_id[k][q] = mesh_quality(g);
      out.element_area[k] += rule.weights[q] * det;
    }
    out.area += out.element_area[k];
  }
  out.mesh = std::move(pb);
  return out;
}

RegistrationContext::RegistrationContext(const GeometricMap& gm, const DisplacementSpace& space, PenaltyConfig config,
                                         std::shared_ptr<const QualityMesh> pb, int quad_degree)
    : gm_(&gm), space_(&space), config_(config), pb_(std::move(pb)) {
  config_.validate();
  quad_ = polytope_quadrature(gm, quad_degree > 0 ? quad_degree : default_quadrature_degree(space.degree()));
  val_q_ = std::make_shared<DenseOp>(space.value_operator(quad_.points));
  grad_q_ = std::make_shared<DenseOp>(space.gradient_operator(quad_.points));
  if (pb_) val_pb_ = std::make_shared<DenseOp>(space.value_operator(pb_->preimages));
  barrier_w_.resize(quad_.size());
  for (std::size_t q = 0; q < quad_.size(); ++q) barrier_w_[q] = quad_.weights[q] / quad_.area;
}

void RegistrationContext::set_pointset(const std::vector<Vec2>& template_points) {
  ps_points_ = template_points;
  ps_pre_.resize(ps_points_.size());
  ps_pre_x_.resize(ps_points_.size());
  for (std::size_t i = 0; i < ps_points_.size(); ++i) ps_pre_[i] = psi_preimage(*gm_, ps_points_[i], &ps_pre_x_[i]);
  val_ps_ = std::make_shared<DenseOp>(space_->value_operator(ps_pre_));
}

std::vector<double> RegistrationContext::template_weights() const {
  std::vector<double> w(quad_.size());
  for (std::size_t q = 0; q < w.size(); ++q) w[q] = quad_.weights[q] * quad_.psi_jacobian[q];
  return w;
}

ReducedOperators::ReducedOperators(const RegistrationContext& ctx, const Eigen::MatrixXd& w) : ctx_(&ctx) {
  const int m_full = ctx.space().dim();
  if (w.size() == 0) {
    identity_ = true;
    dim_ = m_full;
    val_q_ = ctx.value_q();
    grad_q_ = ctx.grad_q();
    val_pb_ = ctx.value_pb();
    val_ps_ = ctx.value_ps();
    penalty_ = ctx.space().penalty_matrix();
    return;
  }
  if (w.rows() != m_full) throw Error(ErrorCode::InvalidArgument, "reduced basis has the wrong number of rows");
  identity_ = false;
  w_ = w;
  dim_ = static_cast<int>(w.cols());
  val_q_ = std::make_shared<DenseOp>(ctx.value_q()->times(w));
  grad_q_ = std::make_shared<DenseOp>(ctx.grad_q()->times(w));
  if (ctx.value_pb()) val_pb_ = std::make_shared<DenseOp>(ctx.value_pb()->times(w));
  if (ctx.value_ps()) val_ps_ = std::make_shared<DenseOp>(ctx.value_ps()->times(w));
  penalty_ = w.transpose() * ctx.space().penalty_matrix() * w;
}

// ---------------------------------------------------------------------------

namespace {

void check_size(const ReducedOperators& ops, const Eigen::VectorXd& b) {
  if (b.size() != ops.dim()) throw Error(ErrorCode::InvalidArgument, "coefficient vector has the wrong size");
}

}  // namespace

Term jacobian_penalty(const ReducedOperators& ops, const Eigen::VectorXd& b, bool with_grad) {
  check_size(ops, b);
  const auto& ctx = ops.context();
  const std::size_t n = ctx.quadrature().size();
  const Eigen::VectorXd g = ops.grad_q().apply(b);
  thread_local std::vector<double> comp[4], sens[4];
  for (int c = 0; c < 4; ++c) {
    comp[c].resize(n);
    sens[c].resize(n);
  }
  for (std::size_t q = 0; q < n; ++q) {
    for (int c = 0; c < 4; ++c) comp[c][q] = g[4 * q + c];
  }
  const auto& cfg = ctx.config();
  const simd::BarrierInput in{comp[0].data(), comp[1].data(), comp[2].data(), comp[3].data(),
                              ctx.barrier_weights().data(), n, cfg.eps, cfg.c_exp, kExpCap};
  const simd::BarrierSens s{sens[0].data(), sens[1].data(), sens[2].data(), sens[3].data()};
  const auto res = simd::kernels().jacobian_barrier(in, with_grad ? &s : nullptr);
  Term t;
  t.value = res.sum;
  t.flagged = res.capped;
  if (with_grad) {
    Eigen::VectorXd d(4 * n);
    for (std::size_t q = 0; q < n; ++q) {
      for (int c = 0; c < 4; ++c) d[4 * q + c] = sens[c][q];
    }
    t.grad = ops.grad_q().apply_t(d);
  }
  return t;
}

Term mesh_penalty(const ReducedOperators& ops, const Eigen::VectorXd& b, bool with_grad) {
  check_size(ops, b);
  Term t;
  const auto& ctx = ops.context();
  const QualityMesh* pb = ctx.quality_mesh();
  if (!pb) {
    if (with_grad) t.grad = Eigen::VectorXd::Zero(b.size());
    return t;
  }
  const auto& gm = ctx.geometric_map();
  const std::size_t nn = pb->preimage_x.size();
  const Eigen::VectorXd u = ops.value_pb()->apply(b);
  std::vector<Vec2> y(nn);
  std::vector<Mat2> jac(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    bool clamped = false;
    const auto v = eval_psi_clamped(gm, pb->preimage_x[i] + u.segment<2>(2 * i), &clamped);
    y[i] = v.y;
    jac[i] = v.grad;
    t.flagged += clamped;
  }
  const double kappa = ctx.config().kappa_msh;
  std::vector<Vec2> dfdy(with_grad ? nn : 0, Vec2::Zero());
  const std::size_t nq = pb->quad_weights.size();
  for (std::size_t k = 0; k < pb->table.element_nodes.size(); ++k) {
    const auto& ids = pb->table.element_nodes[k];
    const double c = pb->element_area[k] / (0.5 * pb->area);
    for (std::size_t q = 0; q < nq; ++q) {
      const auto& gr = pb->grads[q];
      Mat2 g = Mat2::Zero();
      for (std::size_t l = 0; l < ids.size(); ++l) g += y[ids[l]] * gr[l].transpose();
      bool degenerate = false;
      const double qy = mesh_quality(g, &degenerate);
      const double expo = qy / pb->q_id[k][q] - kappa;
      if (degenerate || expo > kExpCap) {
        t.value += c * pb->quad_weights[q] * std::exp(kExpCap);
        ++t.flagged;
        continue;
      }
      const double e = c * pb->quad_weights[q] * std::exp(expo);
      t.value += e;
      if (!with_grad) continue;
      const double f = g.squaredNorm();
      const double d = g.determinant();
      Mat2 cof;
      cof << g(1, 1), -g(1, 0), -g(0, 1), g(0, 0);
      const Mat2 dq = 0.5 * (f / d) * (2.0 * g / d - (f / (d * d)) * cof);
      const Mat2 dfdg = (e / pb->q_id[k][q]) * dq;
      for (std::size_t l = 0; l < ids.size(); ++l) dfdy[ids[l]] += dfdg * gr[l];
    }
  }
  if (with_grad) {
    Eigen::VectorXd d(2 * nn);
    for (std::size_t i = 0; i < nn; ++i) d.segment<2>(2 * i) = jac[i].transpose() * dfdy[i];
    t.grad = ops.value_pb()->apply_t(d);
  }
  return t;
}

Term smoothness_penalty(const ReducedOperators& ops, const Eigen::VectorXd& b, bool with_grad) {
  check_size(ops, b);
  Term t;
  const Eigen::VectorXd pb = ops.penalty() * b;
  t.value = b.dot(pb);
  if (with_grad) t.grad = 2.0 * pb;
  return t;
}

Term pointset_target(const ReducedOperators& ops, const std::vector<Vec2>& targets, const Eigen::VectorXd& b,
                     bool with_grad, double weight) {
  check_size(ops, b);
  const auto& ctx = ops.context();
  const auto& pre = ctx.pointset_preimage_x();
  if (targets.size() != pre.size()) {
    throw Error(ErrorCode::InvalidArgument, "point-set target has " + std::to_string(targets.size()) +
                                                " points for " + std::to_string(pre.size()) + " template points");
  }
  Term t;
  if (pre.empty()) {
    if (with_grad) t.grad = Eigen::VectorXd::Zero(b.size());
    return t;
  }
  const double w = weight < 0.0 ? 1.0 / static_cast<double>(pre.size()) : weight;
  const Eigen::VectorXd u = ops.value_ps()->apply(b);
  Eigen::VectorXd d(with_grad ? 2 * pre.size() : 0);
  for (std::size_t i = 0; i < pre.size(); ++i) {
    bool clamped = false;
    const auto v = eval_psi_clamped(ctx.geometric_map(), pre[i] + u.segment<2>(2 * i), &clamped);
    t.flagged += clamped;
    const Vec2 r = v.y - targets[i];
    t.value += w * r.squaredNorm();
    if (with_grad) d.segment<2>(2 * i) = 2.0 * w * v.grad.transpose() * r;
  }
  if (with_grad) t.grad = ops.value_ps()->apply_t(d);
  return t;
}

Eigen::VectorXd sensor_at_quadrature(const ReducedOperators& ops, const Sensor& sensor, const Eigen::VectorXd& b,
                                     std::size_t* clamped) {
  check_size(ops, b);
  const auto& quad = ops.context().quadrature();
  const Eigen::VectorXd u = ops.value_q().apply(b);
  Eigen::VectorXd s(quad.size());
  std::size_t nc = 0;
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const auto v = sensor.eval(quad.x[q] + u.segment<2>(2 * q));
    s[q] = v.value;
    nc += v.clamped;
  }
  if (clamped) *clamped = nc;
  return s;
}

Term distributed_target(const ReducedOperators& ops, const Sensor& sensor, const TemplateSpace& templates,
                        const Eigen::VectorXd& b, bool with_grad) {
  check_size(ops, b);
  const auto& quad = ops.context().quadrature();
  if (templates.points() != quad.size()) {
    throw Error(ErrorCode::InvalidArgument, "template space does not match the quadrature");
  }
  const Eigen::VectorXd u = ops.value_q().apply(b);
  Eigen::VectorXd s(quad.size());
  std::vector<Vec2> ds(quad.size());
  Term t;
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const auto v = sensor.eval(quad.x[q] + u.segment<2>(2 * q));
    s[q] = v.value;
    ds[q] = v.grad;
    t.flagged += v.clamped;
  }
  Eigen::VectorXd r;
  t.value = templates.residual(s, &r);
  if (with_grad) {
    const auto& w = templates.weights();
    Eigen::VectorXd d(2 * quad.size());
    for (std::size_t q = 0; q < quad.size(); ++q) d.segment<2>(2 * q) = 2.0 * w[q] * r[q] * ds[q];
    t.grad = ops.value_q().apply_t(d);
  }
  return t;
}

// ---------------------------------------------------------------------------

Term Objective::target(const Eigen::VectorXd& b, bool with_grad) const {
  Term t;
  t.grad = Eigen::VectorXd::Zero(with_grad ? b.size() : 0);
  if (target_.sensor && target_.templates) {
    const Term d = distributed_target(*ops_, *target_.sensor, *target_.templates, b, with_grad);
    t.value += target_.distributed_weight * d.value;
    if (with_grad) t.grad += target_.distributed_weight * d.grad;
    t.flagged += d.flagged;
  }
  if (target_.pointset) {
    const Term p = pointset_target(*ops_, *target_.pointset, b, with_grad, target_.pointset_weight);
    t.value += p.value;
    if (with_grad) t.grad += p.grad;
    t.flagged += p.flagged;
  }
  return t;
}

double Objective::operator()(const Eigen::VectorXd& b, Eigen::VectorXd* grad) const {
  const bool g = grad != nullptr;
  const auto& cfg = ops_->context().config();
  Term t = target(b, g);
  double f = t.value;
  auto add = [&](const Term& p) {
    f += cfg.xi * p.value;
    if (g) t.grad += cfg.xi * p.grad;
  };
  if (cfg.xi > 0.0) {
    if (cfg.use_jac) add(jacobian_penalty(*ops_, b, g));
    if (cfg.use_msh) add(mesh_penalty(*ops_, b, g));
    if (cfg.use_smooth) add(smoothness_penalty(*ops_, b, g));
  }
  if (g) *grad = std::move(t.grad);
  return f;
}

ObjectiveBreakdown Objective::breakdown(const Eigen::VectorXd& b) const {
  const auto& cfg = ops_->context().config();
  ObjectiveBreakdown out;
  const Term t = target(b, false);
  out.target = t.value;
  out.flagged = t.flagged;
  if (cfg.use_jac) {
    const Term j = jacobian_penalty(*ops_, b, false);
    out.jac = j.value;
    out.flagged += j.flagged;
  }
  if (cfg.use_msh) {
    const Term m = mesh_penalty(*ops_, b, false);
    out.msh = m.value;
    out.flagged += m.flagged;
  }
  if (cfg.use_smooth) out.smooth = smoothness_penalty(*ops_, b, false).value;
  out.total = out.target + cfg.xi * (out.jac + out.msh + out.smooth);
  return out;
}

// ---------------------------------------------------------------------------

Vec2 detect_shock(const std::vector<FacetProfile>& chain, const ShockOptions& options) {
  const std::size_t n = chain.size();
  std::vector<double> mean(n), dmean(n), len(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& f = chain[j];
    if (f.t.empty() || f.t.size() != f.values.size()) {
      throw Error(ErrorCode::InvalidArgument, "facet profile " + std::to_string(j) + " is malformed");
    }
    len[j] = (f.b - f.a).norm();
    const double span = f.t.back() - f.t.front();
    if (span <= 0.0) {
      mean[j] = f.values.front();
      dmean[j] = 0.0;
      continue;
    }
    double s = 0.0;
    for (std::size_t i = 1; i < f.t.size(); ++i) s += 0.5 * (f.values[i] + f.values[i - 1]) * (f.t[i] - f.t[i - 1]);
    mean[j] = s / span;
    dmean[j] = (f.values.back() - f.values.front()) / (span * len[j]);
  }
  for (std::size_t j = 0; j + 1 < n; ++j) {
    if (mean[j] > options.threshold && options.threshold > mean[j + 1] && dmean[j] < -options.slope / len[j]) {
      return 0.5 * (chain[j].a + chain[j].b);
    }
  }
  throw Error(ErrorCode::NoFeature, "no facet satisfies the shock conditions");
}

std::vector<int> local_maxima(const std::vector<double>& values) {
  std::vector<int> out;
  for (std::size_t i = 1; i + 1 < values.size(); ++i) {
    if (values[i] > values[i - 1] && values[i] > values[i + 1]) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace regmap
