#include "regmap/registration.hpp"

#include "regmap/error.hpp"
#include "regmap/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace regmap {

// ---------------------------------------------------------------------------

CompositeMap::CompositeMap(const GeometricMap& gm, const DisplacementSpace& space, Eigen::VectorXd a)
    : gm_(&gm), space_(&space), a_(std::move(a)) {
  if (a_.size() != space.dim()) throw Error(ErrorCode::InvalidArgument, "coefficient vector has the wrong size");
  field_ = space.field(a_);
}

Vec2 CompositeMap::eval_p(const Vec2& z, Mat2* jac) const {
  const auto& pm = space_->mesh();
  Location loc;
  if (auto l = pm.try_locate(z)) {
    loc = *l;
  } else {
    loc = pm.locate_or_nearest(z);
  }
  const SamplePoint p{loc.element, pm.to_reference(loc.element, z)};
  Mat2 g;
  Vec2 u = space_->displacement(field_, p, &g);
  if (jac) *jac = Mat2::Identity() + g;
  // Nodal value at mesh vertices (exact vertex fixing).
  for (int c = 0; c < 3; ++c) {
    const int v = pm.triangle(loc.element)[c];
    if (pm.vertex(v) == z) {
      const int dof = space_->scalar().element_dofs(loc.element)[c];
      u = field_.segment<2>(2 * dof);
      break;
    }
  }
  return z + u;
}

Vec2 CompositeMap::eval(const Vec2& x, Mat2* jac) const {
  Vec2 z;
  const SamplePoint p = psi_preimage(*gm_, x, &z);
  Mat2 jp;
  const Vec2 zz = eval_p(z, jac ? &jp : nullptr);
  const auto v = eval_psi_clamped(*gm_, zz);
  if (jac) {
    const Mat2 dpsi = gm_->eval_in(p.element, z).grad;
    *jac = v.grad * jp * dpsi.inverse();
  }
  return v.y;
}

Vec2 CompositeMap::invert_p(const Vec2& z) const {
  const double tol = 1e-14 * space_->mesh().diameter();
  Vec2 x = z;
  for (int it = 0; it < 50; ++it) {
    Mat2 j;
    const Vec2 r = eval_p(x, &j) - z;
    if (r.norm() <= tol) return x;
    const double det = j.determinant();
    if (!(det > 0.0)) throw Error(ErrorCode::NoConvergence, "N_p is not invertible near the iterate");
    x -= j.inverse() * r;
  }
  Mat2 j;
  if ((eval_p(x, &j) - z).norm() <= 1e3 * tol) return x;
  throw Error(ErrorCode::NoConvergence, "inverse of N_p did not converge");
}

Vec2 CompositeMap::invert(const Vec2& y) const {
  Vec2 z;
  psi_preimage(*gm_, y, &z);
  return eval_psi_clamped(*gm_, invert_p(z)).y;
}

double CompositeMap::min_jacobian_p(int quad_degree) const {
  const auto& pm = space_->mesh();
  const auto rule = simplex_quadrature(quad_degree > 0 ? quad_degree : default_quadrature_degree(space_->degree()));
  double m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < pm.num_elements(); ++k) {
    for (const Vec2& xi : rule.points) {
      Mat2 g;
      space_->displacement(field_, {k, xi}, &g);
      m = std::min(m, (Mat2::Identity() + g).determinant());
    }
  }
  return m;
}

Vec2 MultiLayerMap::eval(const Vec2& x, Mat2* jac) const {
  Vec2 y = x;
  if (jac) jac->setIdentity();
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    Mat2 j;
    y = it->eval(y, jac ? &j : nullptr);
    if (jac) *jac = j * *jac;
  }
  return y;
}

Vec2 MultiLayerMap::invert(const Vec2& y) const {
  Vec2 x = y;
  for (const auto& layer : layers_) x = layer.invert(x);
  return x;
}

// ---------------------------------------------------------------------------

SolveResult solve_single(const ReducedOperators& ops, const TargetSpec& target, const Eigen::VectorXd& b0,
                         const OptimizerOptions& options) {
  if (b0.size() != ops.dim() || !b0.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "initial coefficients must be finite with length " +
                                                std::to_string(ops.dim()));
  }
  const Objective obj(ops, target);
  SolveResult out;
  out.b = b0;
  try {
    const auto res = lbfgs([&](const Eigen::VectorXd& b, Eigen::VectorXd* g) { return obj(b, g); }, b0, options);
    out.b = res.x;
    out.objective = res.f;
    out.initial_objective = res.history.front();
    out.iterations = res.iterations;
    out.converged = res.converged;
    out.line_search_failed = res.line_search_failed;
    out.history = res.history;
  } catch (const Error& e) {
    out.error = e.what();
    out.objective = obj(out.b, nullptr);
    out.initial_objective = out.objective;
  }
  const auto bd = obj.breakdown(out.b);
  out.target = bd.target;
  out.flagged = bd.flagged;
  return out;
}

// ---------------------------------------------------------------------------

int energy_rank(const Eigen::VectorXd& lambda, double tol) {
  const double total = lambda.sum();
  if (!(total > 0.0)) return 0;
  double cum = 0.0;
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    cum += lambda[j];
    if (cum >= (1.0 - tol) * total) return static_cast<int>(j + 1);
  }
  return static_cast<int>(lambda.size());
}

PodResult pod(const Eigen::MatrixXd& s, double tol_pod) {
  if (s.cols() == 0) throw Error(ErrorCode::InvalidArgument, "POD needs at least one snapshot");
  if (!(tol_pod >= 0.0 && tol_pod < 1.0)) throw Error(ErrorCode::OutOfRange, "tol_pod must lie in [0, 1)");
  const Eigen::MatrixXd c = s.transpose() * s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  const Eigen::Index k = c.rows();
  PodResult out;
  out.eigenvalues.resize(k);
  Eigen::MatrixXd v(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.eigenvalues[i] = std::max(0.0, eig.eigenvalues()[k - 1 - i]);
    v.col(i) = eig.eigenvectors().col(k - 1 - i);
  }
  int m = energy_rank(out.eigenvalues, tol_pod);
  while (m > 0 && !(out.eigenvalues[m - 1] > 1e-14 * out.eigenvalues[0])) --m;
  out.m = m;
  Eigen::MatrixXd w(s.rows(), m);
  for (int i = 0; i < m; ++i) w.col(i) = s * v.col(i) / std::sqrt(out.eigenvalues[i]);
  if (m > 0) {
    // Re-orthonormalize; keep the orientation of each mode.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(s.rows(), m);
    for (int i = 0; i < m; ++i) {
      if (q.col(i).dot(w.col(i)) < 0.0) q.col(i) *= -1.0;
    }
    w = std::move(q);
  }
  out.w = std::move(w);
  out.projected = out.w.transpose() * s;
  return out;
}

// ---------------------------------------------------------------------------

Ordering order_parameters(const std::vector<Eigen::VectorXd>& params, const Eigen::VectorXd& mu_star,
                          OrderingRule rule) {
  const int k = static_cast<int>(params.size());
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "empty training set");
  Ordering out;
  std::vector<bool> used(k, false);
  int first = 0;
  for (int i = 1; i < k; ++i) {
    if ((params[i] - mu_star).norm() < (params[first] - mu_star).norm()) first = i;
  }
  out.order.push_back(first);
  used[first] = true;
  std::vector<double> dist(k);
  for (int i = 0; i < k; ++i) dist[i] = (params[i] - params[first]).norm();
  for (int pos = 1; pos < k; ++pos) {
    int best = -1;
    for (int i = 0; i < k; ++i) {
      if (used[i]) continue;
      if (best < 0 || (rule == OrderingRule::Farthest ? dist[i] > dist[best] : dist[i] < dist[best])) best = i;
    }
    out.order.push_back(best);
    used[best] = true;
    for (int i = 0; i < k; ++i) dist[i] = std::min(dist[i], (params[i] - params[best]).norm());
  }
  out.neighbor.assign(k, -1);
  for (int pos = 1; pos < k; ++pos) {
    int ne = 0;
    const auto& mu = params[out.order[pos]];
    for (int j = 1; j < pos; ++j) {
      if ((params[out.order[j]] - mu).norm() < (params[out.order[ne]] - mu).norm()) ne = j;
    }
    out.neighbor[pos] = ne;
  }
  return out;
}

// ---------------------------------------------------------------------------

double GreedyResult::max_target() const {
  double m = 0.0;
  for (double t : targets) m = std::max(m, t);
  return m;
}

bool GreedyResult::box_ok() const {
  return std::all_of(box.begin(), box.end(), [](const BoxCheck& b) { return b.ok; });
}

double evaluate_target(const RegistrationContext& ctx, const TargetSpec& target, const Eigen::VectorXd& a_full) {
  const ReducedOperators ops(ctx);
  return Objective(ops, target).target(a_full, false).value;
}

GreedyResult greedy(const GreedyProblem& problem, const GreedyOptions& options) {
  if (!problem.context) throw Error(ErrorCode::InvalidArgument, "greedy problem has no context");
  const RegistrationContext& ctx = *problem.context;
  const int k = static_cast<int>(problem.params.size());
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "empty training set");
  const bool distributed = !problem.sensors.empty();
  const bool pointset = !problem.pointsets.empty();
  if (distributed && static_cast<int>(problem.sensors.size()) != k) {
    throw Error(ErrorCode::InvalidArgument, "one sensor per training parameter is required");
  }
  if (pointset && static_cast<int>(problem.pointsets.size()) != k) {
    throw Error(ErrorCode::InvalidArgument, "one point set per training parameter is required");
  }
  if (!distributed && !pointset) throw Error(ErrorCode::InvalidArgument, "greedy problem has no target");
  if (distributed && problem.initial_sensors.empty()) {
    throw Error(ErrorCode::InvalidArgument, "distributed target needs an initial template");
  }
  if (problem.initial_sensors.size() != problem.initial_params.size()) {
    throw Error(ErrorCode::InvalidArgument, "initial templates and parameters differ in number");
  }
  if (options.n_max < 1 || !(options.tol > 0.0) || !(options.c_inf > 0.0)) {
    throw Error(ErrorCode::OutOfRange, "greedy hyperparameters out of range");
  }

  const int m_full = ctx.space().dim();
  const int threads = std::max(1, options.threads);
  GreedyResult res;
  res.templates = TemplateSpace(ctx.template_weights());

  auto ops = std::make_unique<ReducedOperators>(ctx);
  std::vector<Eigen::VectorXd> initial_values;
  for (std::size_t i = 0; i < problem.initial_params.size(); ++i) {
    res.selected_params.push_back(problem.initial_params[i]);
    int idx = -1;
    for (int j = 0; j < k; ++j) {
      if ((problem.params[j] - problem.initial_params[i]).norm() <= 1e-14 * (1.0 + problem.params[j].norm())) {
        idx = j;
        break;
      }
    }
    res.selected_indices.push_back(idx);
    initial_values.push_back(
        sensor_at_quadrature(*ops, *problem.initial_sensors[i], Eigen::VectorXd::Zero(m_full)));
    res.templates.add(initial_values.back());
  }

  Eigen::VectorXd mu_star;
  if (!problem.initial_params.empty()) {
    mu_star = problem.initial_params.front();
  } else {
    mu_star = Eigen::VectorXd::Zero(problem.params.front().size());
    for (const auto& p : problem.params) mu_star += p / k;
  }
  res.ordering = order_parameters(problem.params, mu_star, options.ordering);

  auto spec = [&](int j) {
    TargetSpec t;
    if (distributed) {
      t.sensor = problem.sensors[j].get();
      t.templates = &res.templates;
      t.distributed_weight = problem.distributed_weight;
    }
    if (pointset) {
      t.pointset = &problem.pointsets[j];
      t.pointset_weight = problem.pointset_weight;
    }
    return t;
  };

  std::vector<SolveResult> sol(k);
  std::vector<Eigen::VectorXd> proj(k);
  res.full = Eigen::MatrixXd::Zero(m_full, k);
  res.errors.assign(k, "");
  res.line_search_failed.assign(k, false);
  PodResult last_pod;

  const int n0 = res.templates.size();
  const int last = distributed ? std::max(n0, options.n_max - 1) : n0;
  for (int n = n0; n <= last; ++n) {
    const bool first = n == n0;
    if (first) {
      for (int pos = 0; pos < k; ++pos) {
        const int j = res.ordering.order[pos];
        const Eigen::VectorXd b0 =
            pos == 0 ? Eigen::VectorXd::Zero(ops->dim()) : sol[res.ordering.order[res.ordering.neighbor[pos]]].b;
        sol[j] = solve_single(*ops, spec(j), b0, options.optimizer);
      }
    } else {
      parallel_for(k, threads, [&](std::size_t j) {
        sol[j] = solve_single(*ops, spec(static_cast<int>(j)), proj[j], options.optimizer);
      });
    }
    GreedyIteration it;
    it.n = res.templates.size();
    for (int j = 0; j < k; ++j) {
      res.full.col(j) = ops->lift(sol[j].b);
      it.targets.push_back(sol[j].target);
      it.iterations.push_back(sol[j].iterations);
      res.errors[j] = sol[j].error;
      res.line_search_failed[j] = sol[j].line_search_failed;
    }
    last_pod = pod(res.full, options.tol_pod);
    it.m = last_pod.m;
    it.argmax = 0;
    for (int j = 1; j < k; ++j) {
      if (it.targets[j] > it.targets[it.argmax]) it.argmax = j;
    }
    it.max_target = it.targets[it.argmax];
    res.history.push_back(it);
    res.targets = it.targets;
    if (it.max_target < options.tol) {
      res.converged = true;
      break;
    }
    if (n == last) break;

    int pick = -1;
    for (int j = 0; j < k; ++j) {
      if (std::find(res.selected_indices.begin(), res.selected_indices.end(), j) != res.selected_indices.end()) {
        continue;
      }
      if (pick < 0 || it.targets[j] > it.targets[pick]) pick = j;
    }
    if (pick < 0) break;
    res.selected_indices.push_back(pick);
    res.selected_params.push_back(problem.params[pick]);

    ops = std::make_unique<ReducedOperators>(ctx, last_pod.w);
    for (int j = 0; j < k; ++j) proj[j] = last_pod.projected.col(j);
    TemplateSpace next(ctx.template_weights());
    for (std::size_t i = 0; i < res.selected_indices.size(); ++i) {
      const int idx = res.selected_indices[i];
      if (idx < 0) {
        next.add(initial_values[i]);
      } else {
        next.add(sensor_at_quadrature(*ops, *problem.sensors[idx], proj[idx]));
      }
    }
    res.templates = std::move(next);
  }

  res.n = res.templates.size();
  res.w = last_pod.w;
  res.eigenvalues = last_pod.eigenvalues;
  res.reduced = last_pod.projected;
  res.unmapped_targets.resize(k);
  for (int j = 0; j < k; ++j) res.unmapped_targets[j] = evaluate_target(ctx, spec(j), Eigen::VectorXd::Zero(m_full));
  for (int pos = 1; pos < k; ++pos) {
    BoxCheck b;
    b.index = res.ordering.order[pos];
    b.neighbor = res.ordering.order[res.ordering.neighbor[pos]];
    b.lhs = (res.full.col(b.index) - res.full.col(b.neighbor)).lpNorm<Eigen::Infinity>();
    b.rhs = options.c_inf * (problem.params[b.index] - problem.params[b.neighbor]).norm();
    b.ok = b.lhs <= b.rhs;
    res.box.push_back(b);
  }
  return res;
}

// ---------------------------------------------------------------------------

double r_squared(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  if (truth.size() == 0) return 1.0;
  const double mean = truth.mean();
  const double ss_res = (truth - pred).squaredNorm();
  const double ss_tot = (truth.array() - mean).matrix().squaredNorm();
  const double floor = 1e-24 * std::max(1.0, truth.squaredNorm());
  if (ss_tot <= floor) return ss_res <= floor ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - ss_res / ss_tot;
}

namespace {

double cubic(double r) { return r * r * r; }

}  // namespace

Eigen::VectorXd RbfModel::scaled(const Eigen::VectorXd& mu) const {
  return ((mu - lo_).array() / scale_.array()).matrix();
}

Eigen::VectorXd RbfModel::raw(const Eigen::VectorXd& mu) const {
  const Eigen::VectorXd x = scaled(mu);
  const int l = static_cast<int>(centers_.size());
  const int p = static_cast<int>(x.size());
  Eigen::VectorXd phi(l + p + 1);
  for (int i = 0; i < l; ++i) phi[i] = cubic((x - centers_[i]).norm());
  phi[l] = 1.0;
  phi.tail(p) = x;
  return coef_.transpose() * phi;
}

Eigen::VectorXd RbfModel::predict(const Eigen::VectorXd& mu) const {
  if (mu.size() != lo_.size()) throw Error(ErrorCode::InvalidArgument, "parameter has the wrong dimension");
  Eigen::VectorXd out = raw(mu);
  for (int i = 0; i < modes(); ++i) {
    if (!retained_[i]) out[i] = mean_[i];
  }
  return out;
}

RbfModel RbfModel::fit(const std::vector<Eigen::VectorXd>& sites, const Eigen::MatrixXd& values,
                       const RbfOptions& options) {
  const int k = static_cast<int>(sites.size());
  if (k == 0 || values.rows() != k) throw Error(ErrorCode::InvalidArgument, "RBF needs one value row per site");
  if (!(options.split > 0.0 && options.split <= 1.0)) throw Error(ErrorCode::OutOfRange, "split must lie in (0, 1]");
  const int p = static_cast<int>(sites.front().size());
  const int m = static_cast<int>(values.cols());
  RbfModel model;
  model.lo_ = sites.front();
  Eigen::VectorXd hi = sites.front();
  for (const auto& s : sites) {
    if (s.size() != p) throw Error(ErrorCode::InvalidArgument, "sites have inconsistent dimensions");
    model.lo_ = model.lo_.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  model.scale_ = hi - model.lo_;
  for (int d = 0; d < p; ++d) {
    if (!(model.scale_[d] > 0.0)) model.scale_[d] = 1.0;
  }

  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(options.seed);
  for (int i = k - 1; i > 0; --i) std::swap(perm[i], perm[gen() % static_cast<std::uint64_t>(i + 1)]);
  int n_learn = k;
  if (k >= 5) n_learn = std::clamp(static_cast<int>(std::lround(options.split * k)), std::min(k, p + 2), k);
  model.learn_.assign(perm.begin(), perm.begin() + n_learn);
  model.test_.assign(perm.begin() + n_learn, perm.end());
  std::sort(model.learn_.begin(), model.learn_.end());
  std::sort(model.test_.begin(), model.test_.end());

  for (int i : model.learn_) {
    Eigen::VectorXd c = model.scaled(sites[i]);
    for (const auto& prev : model.centers_) {
      if ((c - prev).norm() < 1e-12) {
        c[0] += 1e-10 * (1 + static_cast<int>(model.centers_.size()));
        model.degenerate_ = true;
      }
    }
    model.centers_.push_back(c);
  }
  const int l = n_learn;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(l + p + 1, l + p + 1);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(l + p + 1, m);
  for (int i = 0; i < l; ++i) {
    for (int j = 0; j < l; ++j) a(i, j) = cubic((model.centers_[i] - model.centers_[j]).norm());
    a(i, l) = a(l, i) = 1.0;
    for (int d = 0; d < p; ++d) a(i, l + 1 + d) = a(l + 1 + d, i) = model.centers_[i][d];
    rhs.row(i) = values.row(model.learn_[i]);
  }
  model.coef_ = a.fullPivLu().solve(rhs);
  model.mean_ = rhs.topRows(l).colwise().mean().transpose();

  model.r2_.assign(m, 1.0);
  model.retained_.assign(m, true);
  if (!model.test_.empty()) {
    const int t = static_cast<int>(model.test_.size());
    Eigen::MatrixXd pred(t, m), truth(t, m);
    for (int i = 0; i < t; ++i) {
      pred.row(i) = model.raw(sites[model.test_[i]]).transpose();
      truth.row(i) = values.row(model.test_[i]);
    }
    for (int j = 0; j < m; ++j) {
      model.r2_[j] = r_squared(truth.col(j), pred.col(j));
      model.retained_[j] = model.r2_[j] >= options.r_min;
    }
  }
  return model;
}

RbfModel RbfModel::from_parts(std::vector<Eigen::VectorXd> centers, Eigen::MatrixXd coef, Eigen::VectorXd lo,
                              Eigen::VectorXd scale, Eigen::VectorXd mean, std::vector<double> r2,
                              std::vector<bool> retained) {
  RbfModel m;
  m.centers_ = std::move(centers);
  m.coef_ = std::move(coef);
  m.lo_ = std::move(lo);
  m.scale_ = std::move(scale);
  m.mean_ = std::move(mean);
  m.r2_ = std::move(r2);
  m.retained_ = std::move(retained);
  const auto rows = static_cast<Eigen::Index>(m.centers_.size() + m.lo_.size() + 1);
  if (m.coef_.rows() != rows || m.mean_.size() != m.coef_.cols() ||
      static_cast<Eigen::Index>(m.r2_.size()) != m.coef_.cols() || m.r2_.size() != m.retained_.size() ||
      m.scale_.size() != m.lo_.size()) {
    throw Error(ErrorCode::InvalidArgument, "inconsistent RBF model");
  }
  return m;
}

ParametricMap::ParametricMap(const GeometricMap& gm, const DisplacementSpace& space, RbfModel model,
                             Eigen::MatrixXd w)
    : gm_(&gm), space_(&space), model_(std::move(model)), w_(std::move(w)) {
  if (w_.rows() != space.dim() || w_.cols() != model_.modes()) {
    throw Error(ErrorCode::InvalidArgument, "mapping basis does not match the regressor");
  }
}

Eigen::VectorXd ParametricMap::coefficients(const Eigen::VectorXd& mu) const { return w_ * model_.predict(mu); }

CompositeMap ParametricMap::at(const Eigen::VectorXd& mu) const {
  return CompositeMap(*gm_, *space_, coefficients(mu));
}

}  // namespace regmap
