#include "regmap/displacement_space.hpp"
#include "regmap/fixtures.hpp"
#include "regmap/mesh_io.hpp"

#include "test_util.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace regmap;
using namespace regmap::testing;

namespace {

PolytopeMesh square_pm(int nx = 1, int ny = 1) {
  return polytope_from_curved(rectangle_mesh(nx, ny, Vec2(0, 0), Vec2(1, 1), 1));
}

Eigen::VectorXd random_coeffs(int m, double scale) {
  Eigen::VectorXd a(m);
  for (int i = 0; i < m; ++i) a[i] = scale * normal();
  return a;
}

// Exact integral over [0,1]^2 of p^2 for p = sum c(a,b) x^a y^b.
double square_integral_of_square(const Eigen::MatrixXd& c) {
  double s = 0.0;
  for (int a = 0; a < c.rows(); ++a)
    for (int b = 0; b < c.cols(); ++b)
      for (int a2 = 0; a2 < c.rows(); ++a2)
        for (int b2 = 0; b2 < c.cols(); ++b2) s += c(a, b) * c(a2, b2) / ((a + a2 + 1.0) * (b + b2 + 1.0));
  return s;
}

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (a + t * d - p).norm();
}

double distance_to_boundary(const PolytopeMesh& pm, const Vec2& p) {
  double best = 1e300;
  for (int j : pm.boundary_facets()) {
    const auto& f = pm.facet(j);
    best = std::min(best, distance_to_segment(p, pm.vertex(f.v[0]), pm.vertex(f.v[1])));
  }
  return best;
}

}  // namespace

TEST_CASE("displacement space dimension counts") {
  const PolytopeMesh tri({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
  CHECK(DisplacementSpace(tri, 1).dim() == 0);
  // 4 boundary midpoints with one tangential dof, one interior midpoint with two.
  CHECK(DisplacementSpace(square_pm(), 2).dim() == 6);
  // k = 3: 8 boundary edge nodes, 2 diagonal nodes and 2 interior nodes (x2).
  CHECK(DisplacementSpace(square_pm(), 3).dim() == 8 + 4 + 4);
  // 2x1 cells: the bottom and top mid vertices are collinear and keep one dof.
  const auto pm = polytope_from_curved(rectangle_mesh(2, 1, Vec2(0, 0), Vec2(2, 1), 1));
  CHECK(DisplacementSpace(pm, 1).dim() == 2);
}

TEST_CASE("scalar space numbering is conforming") {
  const ScalarSpace s(square_pm(3, 2), 4);
  for (int k = 0; k < s.mesh().num_elements(); ++k) {
    const auto lattice = lattice_nodes(4);
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      CHECK((s.nodes()[s.element_dofs(k)[i]] - s.mesh().from_reference(k, lattice[i])).norm() < 1e-14);
    }
  }
}

TEST_CASE("basis satisfies the boundary constraints and is orthonormal") {
  const GeometricMap gm(semicircle_mesh(3), {.angle_tol = 0.1});
  const PolytopeMesh& pm = gm.polytope();
  const DisplacementSpace space(pm, 3);
  const int m = space.dim();
  REQUIRE(m > 0);
  const auto line = gauss_legendre_unit(6);
  double max_normal = 0.0;
  for (int j : pm.boundary_facets()) {
    const auto& f = pm.facet(j);
    const Vec2 nrm = pm.outward_normal(j);
    for (double t : line.points) {
      const Vec2 x = pm.vertex(f.v[0]) + t * (pm.vertex(f.v[1]) - pm.vertex(f.v[0]));
      const SamplePoint p{f.elem[0], pm.to_reference(f.elem[0], x)};
      for (int i = 0; i < m; ++i) {
        max_normal = std::max(max_normal, std::abs(space.displacement(space.basis().col(i), p).dot(nrm)));
      }
    }
  }
  CHECK(max_normal <= 1e-12);
  for (int v : pm.polytope_vertices()) {
    for (int i = 0; i < m; ++i) {
      CHECK(space.basis()(2 * v, i) == 0.0);
      CHECK(space.basis()(2 * v + 1, i) == 0.0);
    }
  }

  Eigen::MatrixXd g(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) g(i, j) = space.inner(space.basis().col(i), space.basis().col(j));
  CHECK((g - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-10);

  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd a = random_coeffs(m, 1.0);
    const Eigen::VectorXd u = space.field(a);
    CHECK(std::abs(std::sqrt(space.inner(u, u)) - a.norm()) / a.norm() < 1e-10);
  }
  CHECK((orthonormalize(Eigen::MatrixXd::Identity(m, m)) - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd t = orthonormalize(space.reduced_gram());
  CHECK((t.transpose() * space.reduced_gram() * t - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(error_code_of([] { orthonormalize(-Eigen::MatrixXd::Identity(3, 3)); }) == ErrorCode::NonSPD);
}

TEST_CASE("H2 forms on global polynomials") {
  for (int k = 2; k <= 6; ++k) {
    const DisplacementSpace space(square_pm(2, 2), k);
    // Random global polynomial of degree k per component: gradient jumps vanish.
    Eigen::MatrixXd c1 = Eigen::MatrixXd::Zero(k + 1, k + 1), c2 = c1;
    for (int a = 0; a <= k; ++a)
      for (int b = 0; a + b <= k; ++b) {
        c1(a, b) = normal();
        c2(a, b) = normal();
      }
    auto poly = [](const Eigen::MatrixXd& c, const Vec2& x) {
      double s = 0.0;
      for (int a = 0; a < c.rows(); ++a)
        for (int b = 0; b < c.cols(); ++b) s += c(a, b) * std::pow(x.x(), a) * std::pow(x.y(), b);
      return s;
    };
    const Eigen::VectorXd u = space.interpolate([&](const Vec2& x) { return Vec2(poly(c1, x), poly(c2, x)); });
    CHECK(space.jump_terms(u) < 1e-10 * std::max(1.0, space.seminorm_P_brkn(u)));
  }

  // Quadratic scalar component: (w, w) = int |H|^2 + w^2 plus the Hessian
  // average on the diagonal, |F| / beta |H|^2; the jump part is zero.
  const DisplacementSpace space(square_pm(), 2);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, 3);
  c(0, 0) = 0.3;
  c(1, 0) = -1.1;
  c(0, 1) = 0.7;
  c(2, 0) = 1.5;
  c(1, 1) = -0.8;
  c(0, 2) = 2.2;
  const Eigen::VectorXd u = space.interpolate([&](const Vec2& x) {
    const double w = c(0, 0) + c(1, 0) * x.x() + c(0, 1) * x.y() + c(2, 0) * x.x() * x.x() + c(1, 1) * x.x() * x.y() +
                     c(0, 2) * x.y() * x.y();
    return Vec2(w, 0.0);
  });
  const double hess = std::pow(2 * c(2, 0), 2) + 2 * std::pow(c(1, 1), 2) + std::pow(2 * c(0, 2), 2);
  const double diag = std::sqrt(2.0);
  const double average = diag / (10.0 * 4.0 / diag) * hess;
  const double oracle = hess + square_integral_of_square(c) + average;
  CHECK(std::abs(space.inner(u, u) - oracle) / oracle < 1e-12);
  CHECK(std::abs(space.seminorm_P(u) - hess - average) / hess < 1e-12);
  CHECK(std::abs(space.seminorm_P_brkn(u) - hess) / hess < 1e-12);
  CHECK(space.jump_terms(u) < 1e-12 * hess);
}

TEST_CASE("seminorm vanishes on affine maps") {
  const GeometricMap gm(semicircle_mesh(4), {.angle_tol = 1e-2});
  const DisplacementSpace space(gm.polytope(), 4);
  for (int t = 0; t < 20; ++t) {
    Mat2 a;
    a << normal(), normal(), normal(), normal();
    const Vec2 b(normal(), normal());
    const Eigen::VectorXd u = space.interpolate([&](const Vec2& x) { return Vec2(b + a * x); });
    CHECK(space.seminorm_P(u) <= 1e-10 * a.squaredNorm());
    CHECK(std::abs(space.seminorm_P_brkn(u)) <= 1e-10 * a.squaredNorm());
  }
  const Eigen::VectorXd a = random_coeffs(space.dim(), 0.1);
  const double p1 = a.dot(space.penalty_matrix() * a);
  CHECK(std::abs(p1 - space.seminorm_P(space.field(a))) <= 1e-10 * p1);
  CHECK(std::abs((2 * a).dot(space.penalty_matrix() * (2 * a)) - 4 * p1) <= 1e-12 * p1);
  CHECK(space.seminorm_P(space.field(a)) >= space.seminorm_P_brkn(space.field(a)));
}

TEST_CASE("facet weights and positive definiteness") {
  const H2Forms f1 = assemble_h2_forms(ScalarSpace(square_pm(), 2));
  const H2Forms f2 =
      assemble_h2_forms(ScalarSpace(polytope_from_curved(rectangle_mesh(1, 1, Vec2(0, 0), Vec2(0.5, 0.5), 1)), 2));
  const PolytopeMesh pm = square_pm();
  REQUIRE(pm.interior_facets().size() == 1);
  const int j = pm.interior_facets()[0];
  CHECK(f1.beta[j] == doctest::Approx(10.0 * 4 / std::sqrt(2.0)));
  CHECK(f2.beta[j] == doctest::Approx(2.0 * f1.beta[j]).epsilon(1e-14));

  const DisplacementSpace space(pm, 3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(space.reduced_gram());
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("N_p evaluation") {
  const GeometricMap gm(semicircle_mesh(3), {.angle_tol = 0.1});
  const PolytopeMesh& pm = gm.polytope();
  const DisplacementSpace space(pm, 3);
  const int m = space.dim();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
  const Eigen::VectorXd a = random_coeffs(m, 0.02);
  const double h = 1e-6;
  for (int t = 0; t < 30; ++t) {
    const int k = t % pm.num_elements();
    const Vec2 x = pm.from_reference(k, random_reference_point(0.05));
    const auto v0 = space.eval_Np(zero, x);
    CHECK((v0.y - x).norm() == 0.0);
    CHECK(v0.jac == Mat2::Identity());
    const auto v1 = space.eval_Np(a, x);
    const auto v2 = space.eval_Np(Eigen::VectorXd(2.5 * a), x);
    CHECK(((v2.y - x) - 2.5 * (v1.y - x)).norm() < 1e-14);
    for (int d = 0; d < 2; ++d) {
      const Vec2 e = Vec2::Unit(d) * h;
      const Vec2 fd = (space.eval_Np(a, x + e).y - space.eval_Np(a, x - e).y) / (2 * h);
      CHECK((fd - v1.jac.col(d)).norm() / v1.jac.col(d).norm() < 1e-6);
    }
  }
  CHECK(error_code_of([&] { space.eval_Np(a, Vec2(0.0, 2.0)); }) == ErrorCode::OutsideDomain);

  // Boundary points stay on the polytope boundary.
  for (int j : pm.boundary_facets()) {
    const auto& f = pm.facet(j);
    for (int s = 0; s <= 10; ++s) {
      const Vec2 x = pm.vertex(f.v[0]) + (s / 10.0) * (pm.vertex(f.v[1]) - pm.vertex(f.v[0]));
      const SamplePoint p{f.elem[0], pm.to_reference(f.elem[0], x)};
      CHECK(distance_to_boundary(pm, space.eval_Np(a, p).y) < 1e-10);
    }
  }
  for (int v : pm.polytope_vertices()) CHECK(space.eval_Np(a, pm.vertex(v)).y == pm.vertex(v));
}

TEST_CASE("periodic tying") {
  CurvedMesh cm = rectangle_mesh(3, 2, Vec2(0, 0), Vec2(3, 1), 2);
  pair_periodic(cm, 1, 3, Vec2(0, 1));
  CHECK(cm.periodic_pairs.size() == 3);
  const PolytopeMesh pm = polytope_from_curved(cm);
  const DisplacementSpace periodic(pm, 2);
  const DisplacementSpace free(pm, 2, {.periodic = false});
  CHECK(periodic.dim() < free.dim());
  const Eigen::VectorXd u = periodic.field(random_coeffs(periodic.dim(), 1.0));
  const ScalarSpace& s = periodic.scalar();
  int tied = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s.nodes()[i].y() != 0.0) continue;
    for (int j = 0; j < s.size(); ++j) {
      if ((s.nodes()[j] - s.nodes()[i] - Vec2(0, 1)).norm() < 1e-12) {
        CHECK(u[2 * i] == u[2 * j]);
        CHECK(u[2 * i + 1] == u[2 * j + 1]);
        ++tied;
      }
    }
  }
  CHECK(tied == 7);

  CurvedMesh bad = rectangle_mesh(3, 2, Vec2(0, 0), Vec2(3, 1), 2);
  bad.periodic_pairs.push_back({0, 1});
  CHECK(error_code_of([&] { DisplacementSpace(polytope_from_curved(bad), 2); }) == ErrorCode::InconsistentPeriodicity);
  CurvedMesh shifted = rectangle_mesh(3, 2, Vec2(0, 0), Vec2(3, 1), 2);
  CHECK(error_code_of([&] { pair_periodic(shifted, 1, 3, Vec2(0.5, 1)); }) == ErrorCode::InconsistentPeriodicity);
}
