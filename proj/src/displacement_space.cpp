#include "regmap/displacement_space.hpp"

#include "regmap/error.hpp"

#include <cmath>
#include <numeric>

namespace regmap {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using Strided = Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<2>>;

Strided component(const Eigen::VectorXd& u, int c) { return Strided(u.data() + c, u.size() / 2); }

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Mat2 physical_hessian(const Mat2& ainv, const Jet2& j) { return ainv.transpose() * j.hessian() * ainv; }

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

// ---------------------------------------------------------------------------

ScalarSpace::ScalarSpace(const PolytopeMesh& pm, int degree) : pm_(pm), basis_(degree) {
  const int k = degree;
  const int nv = pm_.num_vertices();
  const int nf = pm_.num_facets();
  const int ne = pm_.num_elements();
  const auto lattice = lattice_nodes(k);
  const int n_edge = 3 + 3 * (k - 1);
  const int n_int = static_cast<int>(lattice.size()) - n_edge;

  nodes_ = pm_.vertices();
  for (int j = 0; j < nf; ++j) {
    const auto& f = pm_.facet(j);
    const Vec2 a = pm_.vertex(f.v[0]);
    const Vec2 b = pm_.vertex(f.v[1]);
    for (int i = 1; i < k; ++i) nodes_.push_back(a + (static_cast<double>(i) / k) * (b - a));
  }
  const int interior_base = static_cast<int>(nodes_.size());
  for (int e = 0; e < ne; ++e) {
    for (int i = n_edge; i < static_cast<int>(lattice.size()); ++i) nodes_.push_back(pm_.from_reference(e, lattice[i]));
  }

  element_dofs_.assign(ne, std::vector<int>(lattice.size(), -1));
  for (int e = 0; e < ne; ++e) {
    auto& d = element_dofs_[e];
    const auto& tri = pm_.triangle(e);
    for (int v = 0; v < 3; ++v) d[v] = tri[v];
    for (int le = 0; le < 3; ++le) {
      const int j = pm_.element_facet(e, le);
      const bool forward = pm_.facet(j).v[0] == tri[le];
      const auto idx = facet_node_indices(k, le);
      for (int i = 1; i < k; ++i) d[idx[i]] = nv + j * (k - 1) + (forward ? i - 1 : k - 1 - i);
    }
    for (int i = 0; i < n_int; ++i) d[n_edge + i] = interior_base + e * n_int + i;
  }
}

std::vector<int> ScalarSpace::facet_dofs(int facet) const {
  const auto& f = pm_.facet(facet);
  const int k = degree();
  std::vector<int> out{f.v[0]};
  for (int i = 1; i < k; ++i) out.push_back(pm_.num_vertices() + facet * (k - 1) + i - 1);
  out.push_back(f.v[1]);
  return out;
}

Eigen::VectorXd ScalarSpace::interpolate(const std::function<double(const Vec2&)>& f) const {
  Eigen::VectorXd out(size());
  for (int i = 0; i < size(); ++i) out[i] = f(nodes_[i]);
  return out;
}

// ---------------------------------------------------------------------------

H2Forms assemble_h2_forms(const ScalarSpace& space, double sigma_beta) {
  const PolytopeMesh& pm = space.mesh();
  const NodalBasis& basis = space.basis();
  const int k = space.degree();
  const int nl = basis.size();
  const int n = space.size();

  const auto rule = simplex_quadrature(default_quadrature_degree(k));
  std::vector<std::vector<Jet2>> jets(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) jets[q] = basis.evaluate(rule.points[q]);

  Triplets th, tm, tj, ta;
  std::vector<Mat2> hess(nl);
  for (int e = 0; e < pm.num_elements(); ++e) {
    const Mat2& ainv = pm.inverse_jacobian(e);
    const double det = std::abs(pm.jacobian(e).determinant());
    Eigen::MatrixXd kh = Eigen::MatrixXd::Zero(nl, nl);
    Eigen::MatrixXd km = Eigen::MatrixXd::Zero(nl, nl);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double w = rule.weights[q] * det;
      for (int i = 0; i < nl; ++i) hess[i] = physical_hessian(ainv, jets[q][i]);
      for (int i = 0; i < nl; ++i) {
        for (int j = 0; j <= i; ++j) {
          kh(i, j) += w * (hess[i].array() * hess[j].array()).sum();
          km(i, j) += w * jets[q][i].v * jets[q][j].v;
        }
      }
    }
    const auto& d = space.element_dofs(e);
    for (int i = 0; i < nl; ++i) {
      for (int j = 0; j <= i; ++j) {
        th.emplace_back(d[i], d[j], kh(i, j));
        tm.emplace_back(d[i], d[j], km(i, j));
        if (i != j) {
          th.emplace_back(d[j], d[i], kh(i, j));
          tm.emplace_back(d[j], d[i], km(i, j));
        }
      }
    }
  }

  H2Forms forms;
  forms.beta.assign(pm.num_facets(), 0.0);
  const LineRule line = gauss_legendre_unit(k + 1);
  std::vector<Vec2> g(2 * nl);
  std::vector<Mat2> h(2 * nl);
  std::vector<int> dofs(2 * nl);
  for (int fj : pm.interior_facets()) {
    const Facet& f = pm.facet(fj);
    const double beta = sigma_beta * k * k / f.length;
    forms.beta[fj] = beta;
    const Vec2 a = pm.vertex(f.v[0]);
    const Vec2 b = pm.vertex(f.v[1]);
    Eigen::MatrixXd kj = Eigen::MatrixXd::Zero(2 * nl, 2 * nl);
    Eigen::MatrixXd ka = Eigen::MatrixXd::Zero(2 * nl, 2 * nl);
    for (int s = 0; s < 2; ++s) {
      const auto& d = space.element_dofs(f.elem[s]);
      std::copy(d.begin(), d.end(), dofs.begin() + s * nl);
    }
    for (std::size_t q = 0; q < line.points.size(); ++q) {
      const Vec2 x = a + line.points[q] * (b - a);
      const double w = line.weights[q] * f.length;
      for (int s = 0; s < 2; ++s) {
        const int el = f.elem[s];
        const Mat2& ainv = pm.inverse_jacobian(el);
        const auto jl = basis.evaluate(pm.to_reference(el, x));
        const double sign = s == 0 ? 1.0 : -1.0;
        for (int i = 0; i < nl; ++i) {
          g[s * nl + i] = sign * (ainv.transpose() * jl[i].grad());
          h[s * nl + i] = 0.5 * physical_hessian(ainv, jl[i]);
        }
      }
      for (int i = 0; i < 2 * nl; ++i) {
        for (int j = 0; j < 2 * nl; ++j) {
          kj(i, j) += w * beta * g[i].dot(g[j]);
          ka(i, j) += w / beta * (h[i].array() * h[j].array()).sum();
        }
      }
    }
    for (int i = 0; i < 2 * nl; ++i) {
      for (int j = 0; j < 2 * nl; ++j) {
        tj.emplace_back(dofs[i], dofs[j], kj(i, j));
        ta.emplace_back(dofs[i], dofs[j], ka(i, j));
      }
    }
  }

  auto build = [n](SparseMatrix& m, const Triplets& t) {
    m.resize(n, n);
    m.setFromTriplets(t.begin(), t.end());
  };
  build(forms.hessian, th);
  build(forms.mass, tm);
  build(forms.jump, tj);
  build(forms.average, ta);
  return forms;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& gram) {
  const Eigen::Index n = gram.rows();
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const double asym = (gram - gram.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, gram.cwiseAbs().maxCoeff())) throw Error(ErrorCode::NonSPD, "Gram matrix is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (gram + gram.transpose()));
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
    throw Error(ErrorCode::NonSPD, "Gram matrix is not positive definite");
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(n, n);
  llt.matrixU().solveInPlace(t);
  return t;
}

// ---------------------------------------------------------------------------

DisplacementSpace::DisplacementSpace(const PolytopeMesh& pm, int degree, SpaceOptions options)
    : scalar_(pm, degree), forms_(assemble_h2_forms(scalar_, options.sigma_beta)) {
  build_reduction(options);
  const int n = scalar_.size();
  const Eigen::Index m0 = reduction_.cols();

  // Component rows of R.
  SparseMatrix sel_x(n, 2 * n), sel_y(n, 2 * n);
  {
    Triplets tx, ty;
    for (int i = 0; i < n; ++i) {
      tx.emplace_back(i, 2 * i, 1.0);
      ty.emplace_back(i, 2 * i + 1, 1.0);
    }
    sel_x.setFromTriplets(tx.begin(), tx.end());
    sel_y.setFromTriplets(ty.begin(), ty.end());
  }
  const SparseMatrix rx = sel_x * reduction_;
  const SparseMatrix ry = sel_y * reduction_;
  const SparseMatrix g = forms_.inner();
  const SparseMatrix gr = SparseMatrix(rx.transpose() * g * rx) + SparseMatrix(ry.transpose() * g * ry);
  reduced_gram_ = Eigen::MatrixXd(gr);
  transform_ = m0 > 0 ? orthonormalize(reduced_gram_) : Eigen::MatrixXd(0, 0);
  basis_ = reduction_ * transform_;

  const Eigen::MatrixXd bx = sel_x * basis_;
  const Eigen::MatrixXd by = sel_y * basis_;
  const SparseMatrix p = forms_.seminorm();
  penalty_ = bx.transpose() * (p * bx) + by.transpose() * (p * by);
  broken_ = bx.transpose() * (forms_.hessian * bx) + by.transpose() * (forms_.hessian * by);
  penalty_ = 0.5 * (penalty_ + penalty_.transpose()).eval();
  broken_ = 0.5 * (broken_ + broken_.transpose()).eval();
}

void DisplacementSpace::build_reduction(const SpaceOptions& options) {
  const PolytopeMesh& pm = scalar_.mesh();
  const int n = scalar_.size();
  std::vector<bool> free_facet(pm.num_facets(), false);
  for (int j : options.free_facets) {
    if (j < 0 || j >= pm.num_facets() || !pm.facet(j).boundary()) {
      throw Error(ErrorCode::InvalidArgument, "free facet " + std::to_string(j) + " is not a boundary facet");
    }
    free_facet[j] = true;
  }

  std::vector<std::vector<Vec2>> normals(n);
  std::vector<bool> zero(n, false);
  for (int j : pm.boundary_facets()) {
    if (free_facet[j]) continue;
    const Vec2 nrm = pm.outward_normal(j);
    for (int d : scalar_.facet_dofs(j)) normals[d].push_back(nrm);
  }
  for (int v = 0; v < pm.num_vertices(); ++v) {
    if (!pm.on_boundary(v) || !pm.in_V(v)) continue;
    if (!free_facet[pm.incoming_facet(v)] && !free_facet[pm.outgoing_facet(v)]) zero[v] = true;
  }
  for (int v : options.fixed_vertices) {
    if (v < 0 || v >= pm.num_vertices()) throw Error(ErrorCode::InvalidArgument, "fixed vertex out of range");
    zero[v] = true;
  }

  UnionFind uf(n);
  if (options.periodic) {
    const double tol = 1e-10 * pm.diameter();
    for (const auto& pr : pm.periodic_pairs()) {
      const auto da = scalar_.facet_dofs(pr[0]);
      const auto db = scalar_.facet_dofs(pr[1]);
      const auto& fa = pm.facet(pr[0]);
      const auto& fb = pm.facet(pr[1]);
      if (da.size() != db.size() || std::abs(fa.length - fb.length) > tol) {
        throw Error(ErrorCode::InconsistentPeriodicity,
                    "periodic facets " + std::to_string(pr[0]) + " and " + std::to_string(pr[1]) + " do not match");
      }
      const auto& x = scalar_.nodes();
      const Vec2 a0 = x[da.front()], a1 = x[da.back()], b0 = x[db.front()], b1 = x[db.back()];
      bool reversed;
      if (((a0 - b1) - (a1 - b0)).norm() <= tol) {
        reversed = true;
      } else if (((a0 - b0) - (a1 - b1)).norm() <= tol) {
        reversed = false;
      } else {
        throw Error(ErrorCode::InconsistentPeriodicity,
                    "periodic facets " + std::to_string(pr[0]) + " and " + std::to_string(pr[1]) + " are not translates");
      }
      const std::size_t m = da.size();
      for (std::size_t i = 0; i < m; ++i) uf.unite(da[i], reversed ? db[m - 1 - i] : db[i]);
    }
  }

  std::vector<std::vector<int>> members(n);
  for (int i = 0; i < n; ++i) members[uf.find(i)].push_back(i);

  Triplets t;
  node_dofs_.assign(n, 0);
  int col = 0;
  for (int root = 0; root < n; ++root) {
    if (members[root].empty()) continue;
    bool z = false;
    std::vector<Vec2> nrm;
    for (int i : members[root]) {
      z = z || zero[i];
      nrm.insert(nrm.end(), normals[i].begin(), normals[i].end());
    }
    std::vector<Vec2> dirs;
    if (!z) {
      if (nrm.empty()) {
        dirs = {Vec2(1, 0), Vec2(0, 1)};
      } else {
        bool rank2 = false;
        for (const auto& v : nrm) rank2 = rank2 || std::abs(cross(nrm[0], v)) > 1e-10;
        if (!rank2) dirs = {Vec2(-nrm[0].y(), nrm[0].x())};
      }
    }
    for (const auto& d : dirs) {
      for (int i : members[root]) {
        if (d.x() != 0.0) t.emplace_back(2 * i, col, d.x());
        if (d.y() != 0.0) t.emplace_back(2 * i + 1, col, d.y());
      }
      ++col;
    }
    for (int i : members[root]) node_dofs_[i] = static_cast<int>(dirs.size());
  }
  reduction_.resize(2 * n, col);
  reduction_.setFromTriplets(t.begin(), t.end());
}

Eigen::VectorXd DisplacementSpace::interpolate(const std::function<Vec2(const Vec2&)>& f) const {
  Eigen::VectorXd out(full_size());
  const auto& x = scalar_.nodes();
  for (int i = 0; i < scalar_.size(); ++i) out.segment<2>(2 * i) = f(x[i]);
  return out;
}

double DisplacementSpace::inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  const SparseMatrix g = forms_.inner();
  double s = 0.0;
  for (int c = 0; c < 2; ++c) s += Eigen::VectorXd(component(u, c)).dot(g * Eigen::VectorXd(component(v, c)));
  return s;
}

namespace {

struct H2Parts {
  double hessian = 0.0;
  double jump = 0.0;
  double average = 0.0;
};

// Sums of squares at quadrature points; u^T A u cancels badly near the nullspace.
H2Parts h2_parts(const ScalarSpace& space, const std::vector<double>& beta, const Eigen::VectorXd& u) {
  const PolytopeMesh& pm = space.mesh();
  const NodalBasis& basis = space.basis();
  const int k = space.degree();
  const int nl = basis.size();
  H2Parts out;
  const auto rule = simplex_quadrature(default_quadrature_degree(k));
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto jets = basis.evaluate(rule.points[q]);
    for (int e = 0; e < pm.num_elements(); ++e) {
      const Mat2& ainv = pm.inverse_jacobian(e);
      const auto& d = space.element_dofs(e);
      for (int c = 0; c < 2; ++c) {
        Mat2 h = Mat2::Zero();
        for (int i = 0; i < nl; ++i) h += u[2 * d[i] + c] * physical_hessian(ainv, jets[i]);
        out.hessian += rule.weights[q] * std::abs(pm.jacobian(e).determinant()) * h.squaredNorm();
      }
    }
  }
  const LineRule line = gauss_legendre_unit(k + 1);
  for (int fj : pm.interior_facets()) {
    const Facet& f = pm.facet(fj);
    const Vec2 a = pm.vertex(f.v[0]);
    const Vec2 b = pm.vertex(f.v[1]);
    for (std::size_t q = 0; q < line.points.size(); ++q) {
      const Vec2 x = a + line.points[q] * (b - a);
      const double w = line.weights[q] * f.length;
      for (int c = 0; c < 2; ++c) {
        Vec2 g = Vec2::Zero();
        Mat2 h = Mat2::Zero();
        for (int s = 0; s < 2; ++s) {
          const int el = f.elem[s];
          const Mat2& ainv = pm.inverse_jacobian(el);
          const auto jl = basis.evaluate(pm.to_reference(el, x));
          const auto& d = space.element_dofs(el);
          const double sign = s == 0 ? 1.0 : -1.0;
          for (int i = 0; i < nl; ++i) {
            g += sign * u[2 * d[i] + c] * (ainv.transpose() * jl[i].grad());
            h += 0.5 * u[2 * d[i] + c] * physical_hessian(ainv, jl[i]);
          }
        }
        out.jump += w * beta[fj] * g.squaredNorm();
        out.average += w / beta[fj] * h.squaredNorm();
      }
    }
  }
  return out;
}

}  // namespace

double DisplacementSpace::seminorm_P(const Eigen::VectorXd& u) const {
  const H2Parts p = h2_parts(scalar_, forms_.beta, u);
  return p.hessian + p.jump + p.average;
}
double DisplacementSpace::seminorm_P_brkn(const Eigen::VectorXd& u) const {
  return h2_parts(scalar_, forms_.beta, u).hessian;
}
double DisplacementSpace::facet_terms(const Eigen::VectorXd& u) const {
  const H2Parts p = h2_parts(scalar_, forms_.beta, u);
  return p.jump + p.average;
}

double DisplacementSpace::jump_terms(const Eigen::VectorXd& u) const { return h2_parts(scalar_, forms_.beta, u).jump; }

SamplePoint DisplacementSpace::sample(const Vec2& x) const {
  const Location loc = mesh().locate(x);
  return {loc.element, mesh().to_reference(loc.element, x)};
}

Vec2 DisplacementSpace::displacement(const Eigen::VectorXd& field, const SamplePoint& p, Mat2* grad) const {
  thread_local std::vector<Jet2> jets;
  jets.resize(scalar_.basis().size());
  scalar_.basis().evaluate(p.xi, jets);
  const Mat2& ainv = mesh().inverse_jacobian(p.element);
  const auto& d = scalar_.element_dofs(p.element);
  Vec2 u = Vec2::Zero();
  Mat2 g = Mat2::Zero();
  for (std::size_t l = 0; l < d.size(); ++l) {
    const Vec2 ul = field.segment<2>(2 * d[l]);
    u += jets[l].v * ul;
    g += ul * (ainv.transpose() * jets[l].grad()).transpose();
  }
  if (grad) *grad = g;
  return u;
}

DisplacementSpace::Value DisplacementSpace::eval_Np(const Eigen::VectorXd& a, const SamplePoint& p) const {
  return eval_Np_at(a, p, mesh().from_reference(p.element, p.xi));
}

DisplacementSpace::Value DisplacementSpace::eval_Np_at(const Eigen::VectorXd& a, const SamplePoint& p,
                                                       const Vec2& x) const {
  thread_local std::vector<Jet2> jets;
  jets.resize(scalar_.basis().size());
  scalar_.basis().evaluate(p.xi, jets);
  const Mat2& ainv = mesh().inverse_jacobian(p.element);
  const auto& d = scalar_.element_dofs(p.element);
  Value out;
  Vec2 u = Vec2::Zero();
  for (std::size_t l = 0; l < d.size(); ++l) {
    const Vec2 ul(basis_.row(2 * d[l]).dot(a), basis_.row(2 * d[l] + 1).dot(a));
    u += jets[l].v * ul;
    out.jac += ul * (ainv.transpose() * jets[l].grad()).transpose();
  }
  out.y = x + u;
  return out;
}

DisplacementSpace::Value DisplacementSpace::eval_Np(const Eigen::VectorXd& a, const Vec2& x) const {
  if (a.size() != dim()) throw Error(ErrorCode::InvalidArgument, "coefficient vector has the wrong size");
  return eval_Np_at(a, sample(x), x);
}

DenseOp DisplacementSpace::value_operator(const std::vector<SamplePoint>& pts) const {
  const int m = dim();
  DenseOp op(2 * pts.size(), m);
  std::vector<double> vals(scalar_.basis().size());
  for (std::size_t p = 0; p < pts.size(); ++p) {
    scalar_.basis().values(pts[p].xi, vals);
    const auto& d = scalar_.element_dofs(pts[p].element);
    Eigen::Map<Eigen::RowVectorXd> r0(op.row(2 * p), m), r1(op.row(2 * p + 1), m);
    for (std::size_t l = 0; l < d.size(); ++l) {
      if (vals[l] == 0.0) continue;
      r0 += vals[l] * basis_.row(2 * d[l]);
      r1 += vals[l] * basis_.row(2 * d[l] + 1);
    }
  }
  return op;
}

DenseOp DisplacementSpace::gradient_operator(const std::vector<SamplePoint>& pts) const {
  const int m = dim();
  DenseOp op(4 * pts.size(), m);
  std::vector<Jet2> jets(scalar_.basis().size());
  for (std::size_t p = 0; p < pts.size(); ++p) {
    scalar_.basis().evaluate(pts[p].xi, jets);
    const Mat2& ainv = mesh().inverse_jacobian(pts[p].element);
    const auto& d = scalar_.element_dofs(pts[p].element);
    for (std::size_t l = 0; l < d.size(); ++l) {
      const Vec2 g = ainv.transpose() * jets[l].grad();
      for (int c = 0; c < 2; ++c) {
        const auto brow = basis_.row(2 * d[l] + c);
        for (int j = 0; j < 2; ++j) {
          Eigen::Map<Eigen::RowVectorXd>(op.row(4 * p + 2 * c + j), m) += g[j] * brow;
        }
      }
    }
  }
  return op;
}

}  // namespace regmap
