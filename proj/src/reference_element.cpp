#include "regmap/reference_element.hpp"

#include "regmap/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace regmap {

Jet2 operator+(const Jet2& a, const Jet2& b) {
  return {a.v + b.v, a.dx + b.dx, a.dy + b.dy, a.dxx + b.dxx, a.dxy + b.dxy, a.dyy + b.dyy};
}

Jet2 operator-(const Jet2& a, const Jet2& b) {
  return {a.v - b.v, a.dx - b.dx, a.dy - b.dy, a.dxx - b.dxx, a.dxy - b.dxy, a.dyy - b.dyy};
}

Jet2 operator*(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.v = a.v * b.v;
  r.dx = a.dx * b.v + a.v * b.dx;
  r.dy = a.dy * b.v + a.v * b.dy;
  r.dxx = a.dxx * b.v + 2.0 * a.dx * b.dx + a.v * b.dxx;
  r.dxy = a.dxy * b.v + a.dx * b.dy + a.dy * b.dx + a.v * b.dxy;
  r.dyy = a.dyy * b.v + 2.0 * a.dy * b.dy + a.v * b.dyy;
  return r;
}

Jet2 operator*(double s, const Jet2& a) {
  return {s * a.v, s * a.dx, s * a.dy, s * a.dxx, s * a.dxy, s * a.dyy};
}

int lattice_size(int degree) { return (degree + 1) * (degree + 2) / 2; }

std::vector<Vec2> lattice_nodes(int degree) {
  if (degree < 1) {
    throw Error(ErrorCode::InvalidArgument, "lattice degree must be >= 1, got " + std::to_string(degree));
  }
  const double h = 1.0 / degree;
  std::vector<Vec2> nodes;
  nodes.reserve(lattice_size(degree));
  nodes.emplace_back(0.0, 0.0);
  nodes.emplace_back(1.0, 0.0);
  nodes.emplace_back(0.0, 1.0);
  for (int i = 1; i < degree; ++i) nodes.emplace_back(i * h, 0.0);
  for (int i = 1; i < degree; ++i) nodes.emplace_back((degree - i) * h, i * h);
  for (int i = 1; i < degree; ++i) nodes.emplace_back(0.0, (degree - i) * h);
  for (int j = 1; j < degree; ++j) {
    for (int i = 1; i + j < degree; ++i) nodes.emplace_back(i * h, j * h);
  }
  return nodes;
}

std::vector<int> facet_node_indices(int degree, int local_facet) {
  std::vector<int> idx;
  idx.reserve(degree + 1);
  idx.push_back(local_facet);
  const int base = 3 + local_facet * (degree - 1);
  for (int i = 0; i < degree - 1; ++i) idx.push_back(base + i);
  idx.push_back((local_facet + 1) % 3);
  return idx;
}

Vec2 facet_point(int local_facet, double t) {
  switch (local_facet) {
    case 0: return {t, 0.0};
    case 1: return {1.0 - t, t};
    default: return {0.0, 1.0 - t};
  }
}

LineRule gauss_jacobi(int n, double alpha, double beta) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "Gauss-Jacobi needs n >= 1");
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  const double ab = alpha + beta;
  for (int k = 0; k < n; ++k) {
    double a;
    if (k == 0) {
      a = (beta - alpha) / (ab + 2.0);
    } else {
      a = (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0));
    }
    t(k, k) = a;
    if (k + 1 < n) {
      const double m = k + 1;
      const double num = 4.0 * m * (m + alpha) * (m + beta) * (m + ab);
      const double den = std::pow(2.0 * m + ab, 2) * (2.0 * m + ab + 1.0) * (2.0 * m + ab - 1.0);
      const double b = std::sqrt(num / den);
      t(k, k + 1) = b;
      t(k + 1, k) = b;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  const double mu0 = std::pow(2.0, ab + 1.0) * std::tgamma(alpha + 1.0) * std::tgamma(beta + 1.0) /
                     std::tgamma(ab + 2.0);
  LineRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    rule.points[k] = es.eigenvalues()(k);
    const double v0 = es.eigenvectors()(0, k);
    rule.weights[k] = mu0 * v0 * v0;
  }
  return rule;
}

LineRule gauss_legendre_unit(int n) {
  LineRule r = gauss_jacobi(n, 0.0, 0.0);
  for (int k = 0; k < n; ++k) {
    r.points[k] = 0.5 * (r.points[k] + 1.0);
    r.weights[k] *= 0.5;
  }
  return r;
}

std::vector<double> gauss_lobatto(int n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "Gauss-Lobatto needs n >= 2, got " + std::to_string(n));
  std::vector<double> x(n);
  x.front() = 0.0;
  x.back() = 1.0;
  if (n > 2) {
    // Interior points are the roots of P'_{n-1}, i.e. Gauss-Jacobi(1,1) nodes.
    const LineRule r = gauss_jacobi(n - 2, 1.0, 1.0);
    for (int k = 0; k < n - 2; ++k) x[k + 1] = 0.5 * (r.points[k] + 1.0);
    for (int k = 1; k < n - 1 - k; ++k) {
      const double s = 0.5 * (x[k] + 1.0 - x[n - 1 - k]);
      x[k] = s;
      x[n - 1 - k] = 1.0 - s;
    }
    if (n % 2 == 1) x[n / 2] = 0.5;
  }
  return x;
}

QuadratureRule simplex_quadrature(int q) {
  if (q < 1) throw Error(ErrorCode::InvalidArgument, "quadrature degree must be >= 1");
  const int n = (q + 2) / 2;  // ceil((q + 1) / 2)
  const LineRule gu = gauss_legendre_unit(n);
  const LineRule gv = gauss_jacobi(n, 1.0, 0.0);
  QuadratureRule rule;
  rule.degree = 2 * n - 1;
  rule.points.reserve(n * n);
  rule.weights.reserve(n * n);
  for (int j = 0; j < n; ++j) {
    const double v = 0.5 * (1.0 + gv.points[j]);
    const double wv = 0.25 * gv.weights[j];
    for (int i = 0; i < n; ++i) {
      rule.points.emplace_back(gu.points[i] * (1.0 - v), v);
      rule.weights.push_back(gu.weights[i] * wv);
    }
  }
  return rule;
}

// ---------------------------------------------------------------------------

ModalBasis::ModalBasis(int degree) : degree_(degree) {
  if (degree < 1) throw Error(ErrorCode::InvalidArgument, "basis degree must be >= 1");
  for (int i = 0; i <= degree; ++i) {
    for (int j = 0; i + j <= degree; ++j) index_.push_back({i, j});
  }
  scale_.assign(index_.size(), 1.0);
  const QuadratureRule rule = simplex_quadrature(2 * degree);
  std::vector<double> norm2(index_.size(), 0.0);
  std::vector<Jet2> buf(index_.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    evaluate_unscaled(rule.points[q], buf);
    for (std::size_t m = 0; m < buf.size(); ++m) norm2[m] += rule.weights[q] * buf[m].v * buf[m].v;
  }
  for (std::size_t m = 0; m < buf.size(); ++m) scale_[m] = 1.0 / std::sqrt(norm2[m]);
}

void ModalBasis::evaluate_unscaled(const Vec2& xi, std::span<Jet2> out) const {
  const int k = degree_;
  // u = 2x + y - 1 and t = 1 - y; Q_i = t^i P_i(u / t) is polynomial in (x, y).
  const Jet2 u{2.0 * xi.x() + xi.y() - 1.0, 2.0, 1.0, 0.0, 0.0, 0.0};
  const Jet2 t{1.0 - xi.y(), 0.0, -1.0, 0.0, 0.0, 0.0};
  const Jet2 t2 = t * t;
  const Jet2 b{2.0 * xi.y() - 1.0, 0.0, 2.0, 0.0, 0.0, 0.0};
  const Jet2 one{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  std::vector<Jet2> qs(k + 1);
  qs[0] = one;
  if (k >= 1) qs[1] = u;
  for (int n = 1; n < k; ++n) {
    qs[n + 1] = (1.0 / (n + 1)) * ((2.0 * n + 1.0) * (u * qs[n]) - static_cast<double>(n) * (t2 * qs[n - 1]));
  }

  std::vector<Jet2> ps(k + 1);
  std::size_t m = 0;
  for (int i = 0; i <= k; ++i) {
    const double alpha = 2.0 * i + 1.0;
    const int jmax = k - i;
    ps[0] = one;
    if (jmax >= 1) {
      ps[1] = 0.5 * ((alpha + 2.0) * b + Jet2{alpha, 0, 0, 0, 0, 0});
    }
    for (int n = 2; n <= jmax; ++n) {
      const double c = 2.0 * n + alpha;
      const double a1 = 2.0 * n * (n + alpha) * (c - 2.0);
      const double a2 = (c - 1.0) * c * (c - 2.0);
      const double a3 = (c - 1.0) * alpha * alpha;
      const double a4 = 2.0 * (n + alpha - 1.0) * (n - 1.0) * c;
      ps[n] = (1.0 / a1) * ((a2 * b + Jet2{a3, 0, 0, 0, 0, 0}) * ps[n - 1] - a4 * ps[n - 2]);
    }
    for (int j = 0; j <= jmax; ++j) out[m++] = qs[i] * ps[j];
  }
}

void ModalBasis::evaluate(const Vec2& xi, std::span<Jet2> out) const {
  evaluate_unscaled(xi, out);
  for (std::size_t m = 0; m < scale_.size(); ++m) out[m] = scale_[m] * out[m];
}

// ---------------------------------------------------------------------------

NodalBasis::NodalBasis(int degree) : modal_(degree), nodes_(lattice_nodes(degree)) {
  const int n = modal_.size();
  vandermonde_.resize(n, n);
  std::vector<Jet2> buf(n);
  for (int r = 0; r < n; ++r) {
    modal_.evaluate(nodes_[r], buf);
    for (int m = 0; m < n; ++m) vandermonde_(r, m) = buf[m].v;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(vandermonde_);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw Error(ErrorCode::SingularMatrix, "Vandermonde matrix singular for degree " + std::to_string(degree));
  }
  inverse_ = lu.inverse();
}

void NodalBasis::evaluate(const Vec2& xi, std::span<Jet2> out) const {
  const int n = size();
  std::vector<Jet2> modal(n);
  modal_.evaluate(xi, modal);
  for (int r = 0; r < n; ++r) {
    Jet2 acc;
    for (int m = 0; m < n; ++m) acc = acc + inverse_(m, r) * modal[m];
    out[r] = acc;
  }
  constexpr double snap = 1e-13;
  const std::array<Vec2, 3> verts{Vec2(0.0, 0.0), Vec2(1.0, 0.0), Vec2(0.0, 1.0)};
  for (int v = 0; v < 3; ++v) {
    if ((xi - verts[v]).lpNorm<Eigen::Infinity>() <= snap) {
      for (int r = 0; r < n; ++r) out[r].v = (r == v) ? 1.0 : 0.0;
      break;
    }
  }
}

std::vector<Jet2> NodalBasis::evaluate(const Vec2& xi) const {
  std::vector<Jet2> out(size());
  evaluate(xi, out);
  return out;
}

void NodalBasis::values(const Vec2& xi, std::span<double> out) const {
  std::vector<Jet2> jets(size());
  evaluate(xi, jets);
  for (int r = 0; r < size(); ++r) out[r] = jets[r].v;
}

}  // namespace regmap
