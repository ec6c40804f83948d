#include "regmap/counterexample.hpp"
#include "regmap/fixtures.hpp"
#include "regmap/mesh_io.hpp"
#include "regmap/rom.hpp"
#include "regmap/synthetic.hpp"

#include "test_util.hpp"

#include <cmath>
#include <numbers>

using namespace regmap;
using namespace regmap::testing;

namespace {

std::shared_ptr<PolytopeMesh> square_p1(int levels) {
  return std::make_shared<PolytopeMesh>(refine_uniform(polytope_from_curved(unit_square_mesh(1)), levels));
}

template <class F>
Vec2 fd_gradient(F&& f, const Vec2& x, double h = 1e-6) {
  return {(f(x + Vec2(h, 0)) - f(x - Vec2(h, 0))) / (2 * h), (f(x + Vec2(0, h)) - f(x - Vec2(0, h))) / (2 * h)};
}

}  // namespace

TEST_CASE("P1 mass matrices integrate exactly") {
  const auto mesh = square_p1(2);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(mesh->num_vertices());
  const Eigen::VectorXd x = vertex_values(*mesh, [](const Vec2& p) { return p.x(); });
  CHECK(lumped_mass(*mesh).sum() == doctest::Approx(1.0).epsilon(1e-14));
  const SparseMatrix m = consistent_mass(*mesh);
  CHECK(one.dot(m * one) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x.dot(m * x) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  const SparseMatrix b = boundary_mass(*mesh);
  CHECK(one.dot(b * one) == doctest::Approx(4.0).epsilon(1e-14));
  // int_{boundary} x^2: right side 1, top and bottom 1/3 each.
  CHECK(x.dot(b * x) == doctest::Approx(5.0 / 3.0).epsilon(1e-14));
  CHECK(relative_error(m, x, x) == 0.0);
  CHECK(relative_error(m, x, 2.0 * x) == doctest::Approx(1.0));
}

TEST_CASE("map_snapshot reproduces linear fields under affine maps") {
  const auto mesh = square_p1(2);
  const Eigen::VectorXd u = vertex_values(*mesh, [](const Vec2& p) { return 2.0 * p.x() - p.y() + 0.5; });
  const auto same = map_snapshot(*mesh, u, [](const Vec2& p) { return p; });
  CHECK((same.values - u).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(same.clamped == 0);
  const auto shrunk = map_snapshot(*mesh, u, [](const Vec2& p) { return Vec2(0.5 * p + Vec2(0.25, 0.1)); });
  const Eigen::VectorXd expect =
      vertex_values(*mesh, [](const Vec2& p) { return 2.0 * (0.5 * p.x() + 0.25) - (0.5 * p.y() + 0.1) + 0.5; });
  CHECK((shrunk.values - expect).cwiseAbs().maxCoeff() < 1e-13);
  const auto outside = map_snapshot(*mesh, u, [](const Vec2& p) { return Vec2(p + Vec2(0.5, 0.0)); });
  CHECK(outside.clamped > 0);
}

TEST_CASE("weighted POD is orthonormal and reproduces the snapshot span") {
  const auto mesh = square_p1(2);
  const Eigen::VectorXd w = lumped_mass(*mesh);
  const int n = mesh->num_vertices();
  Eigen::MatrixXd basis(n, 3);
  for (int i = 0; i < basis.size(); ++i) basis.data()[i] = normal();
  Eigen::MatrixXd mix(3, 8);
  for (int i = 0; i < mix.size(); ++i) mix.data()[i] = normal();
  const Eigen::MatrixXd s = basis * mix;
  const SolutionPod pod(s, w);
  REQUIRE(pod.rank() == 3);
  const Eigen::MatrixXd g = pod.modes().transpose() * w.asDiagonal() * pod.modes();
  CHECK((g - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  for (int j = 0; j < s.cols(); ++j) CHECK((pod.project(s.col(j), 3) - s.col(j)).norm() < 1e-10 * s.col(j).norm());
  for (int i = 1; i < pod.rank(); ++i) CHECK(pod.eigenvalues()[i] <= pod.eigenvalues()[i - 1]);

  // Two collinear snapshots: rank one, exact at n = 1.
  Eigen::MatrixXd two(n, 2);
  two.col(0) = basis.col(0);
  two.col(1) = -3.0 * basis.col(0);
  const SolutionPod one(two, w);
  CHECK(one.rank() == 1);
  CHECK((one.project(two.col(1), 1) - two.col(1)).norm() < 1e-12 * two.col(1).norm());

  CHECK(error_code_of([&] { SolutionPod(s, Eigen::VectorXd::Ones(3)); }) == ErrorCode::InvalidArgument);
  CHECK(error_code_of([&] { SolutionPod(s, Eigen::VectorXd::Zero(n)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("identity maps make both ROM pipelines coincide") {
  const GeometricMap gm(unit_square_mesh(2));
  const DisplacementSpace space(gm.polytope(), 2);
  const auto mesh = square_p1(3);
  const FrontFamily family{.c0 = 0.2, .c1 = 0.6, .width = 0.2};
  RomProblem p;
  p.train.mesh = mesh;
  p.test.mesh = mesh;
  p.train.params = parameter_grid(10, 0.0, 1.0);
  p.test.params = parameter_grid(3, 0.0, 1.0, true);
  auto fill = [&](SnapshotSet& set, std::vector<std::shared_ptr<const CompositeMap>>& maps) {
    set.values.resize(mesh->num_vertices(), set.params.size());
    for (std::size_t j = 0; j < set.params.size(); ++j) {
      set.values.col(j) = vertex_values(*mesh, [&](const Vec2& x) { return family.value(x, set.params[j][0]); });
      maps.push_back(std::make_shared<CompositeMap>(gm, space, Eigen::VectorXd::Zero(space.dim())));
    }
  };
  fill(p.train, p.train_maps);
  fill(p.test, p.test_maps);
  p.n_max = 4;
  const auto cmp = compare_roms(p);
  REQUIRE(cmp.registered_projection.e_max.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(cmp.registered_projection.e_max[i] == doctest::Approx(cmp.unmapped_projection.e_max[i]).epsilon(1e-10));
    CHECK(cmp.registered_regression.e_max[i] == doctest::Approx(cmp.unmapped_regression.e_max[i]).epsilon(1e-10));
    if (i > 0) CHECK(cmp.unmapped_projection.e_max[i] <= cmp.unmapped_projection.e_max[i - 1] + 1e-12);
  }
  CHECK(cmp.clamped == 0);
  const std::string csv = errors_csv(cmp.registered_projection);
  CHECK(csv.rfind("n,E_max,E_max_bnd\n1,", 0) == 0);

  RomProblem bad = p;
  bad.test_maps.pop_back();
  CHECK(error_code_of([&] { compare_roms(bad); }) == ErrorCode::InvalidArgument);
  bad = p;
  bad.n_max = 11;
  CHECK(error_code_of([&] { compare_roms(bad); }) == ErrorCode::OutOfRange);
}

TEST_CASE("synthetic families have consistent gradients") {
  const FrontFamily front;
  const WakeFamily wake;
  for (int t = 0; t < 50; ++t) {
    const Vec2 x(uniform(0.0, 2.0), uniform());
    const double mu = uniform();
    const Vec2 gf = fd_gradient([&](const Vec2& p) { return front.value(p, mu); }, x);
    CHECK((gf - front.gradient(x, mu)).norm() < 1e-6 * std::max(1.0, gf.norm()));
    const Vec2 gw = fd_gradient([&](const Vec2& p) { return wake.value(p, mu); }, x);
    CHECK((gw - wake.gradient(x, mu)).norm() < 1e-6 * std::max(1.0, gw.norm()));
  }
  CHECK(front.value(Vec2(front.center(0.3), 0.4), 0.3) == 0.0);
  const double th = wake.angle(0.5);
  CHECK(wake.value(wake.origin + 0.5 * Vec2(std::cos(th), std::sin(th)), 0.5) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("physical meshes and parameter grids") {
  const GeometricMap straight(unit_square_mesh(2));
  const auto p1 = physical_p1_mesh(straight, 2);
  const PolytopeMesh ref = refine_uniform(straight.polytope(), 2);
  REQUIRE(p1->num_vertices() == ref.num_vertices());
  for (int i = 0; i < ref.num_vertices(); ++i) CHECK((p1->vertex(i) - ref.vertex(i)).norm() < 1e-14);
  CHECK(p1->total_area() == doctest::Approx(1.0));

  const GeometricMap front(front_domain_mesh(4, 2, 3, 0.1), {.angle_tol = 0.2});
  const auto mesh = physical_p1_mesh(front, 2);
  // Area of [0,2]x[0,1] plus the bulge int_0^1 0.1 sin(pi y) dy.
  CHECK(mesh->total_area() == doctest::Approx(2.0 + 0.2 / std::numbers::pi).epsilon(1e-3));
  for (const Vec2& v : mesh->vertices()) CHECK(front.distance_to_boundary(v) >= 0.0);

  const auto grid = parameter_grid(5, 0.0, 1.0);
  REQUIRE(grid.size() == 5);
  CHECK(grid[1][0] == 0.25);
  CHECK(parameter_grid(2, 0.0, 1.0, true)[1][0] == 0.75);
  CHECK(parameter_grid(1, 0.0, 1.0)[0][0] == 0.5);
  CHECK(error_code_of([] { parameter_grid(0, 0.0, 1.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("corner-moving Lipschitz bijection") {
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      const Vec2 x((i + 0.5) / 50, (j + 0.5) / 50);
      const Vec2 y = fold_to_triangle(x);
      CHECK(y.x() + y.y() <= 1.0 + 1e-15);
      CHECK((unfold_from_triangle(y) - x).norm() < 1e-15);
    }
  }
  for (double s : {-0.25, -0.1, 0.1, 0.25}) {
    for (int t = 0; t < 200; ++t) {
      const Vec2 z = random_reference_point();
      Mat2 jac;
      const Vec2 y = triangle_slide(z, s, &jac);
      CHECK(jac.determinant() > 0.0);
      CHECK(y.x() + y.y() == doctest::Approx(z.x() + z.y()).epsilon(1e-14));
      for (int c = 0; c < 2; ++c) {
        const Vec2 fd = fd_gradient([&](const Vec2& p) { return triangle_slide(p, s)[c]; }, z);
        CHECK((fd - jac.row(c).transpose()).norm() < 1e-7);
      }
    }
    // Legs stay fixed.
    for (double u : {0.0, 0.3, 1.0}) {
      CHECK(triangle_slide(Vec2(u, 0.0), s) == Vec2(u, 0.0));
      CHECK(triangle_slide(Vec2(0.0, u), s) == Vec2(0.0, u));
    }
  }
  CHECK((corner_moving_map(Vec2(1, 1)) - Vec2(1.0, 0.5)).norm() < 1e-14);
  CHECK((corner_moving_map(Vec2(1, 1), -0.25) - Vec2(0.5, 1.0)).norm() < 1e-14);
  for (const Vec2& v : {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}) CHECK(corner_moving_map(v) == v);
  // Boundary of the square maps into the boundary.
  for (int t = 0; t <= 20; ++t) {
    const Vec2 y = corner_moving_map(Vec2(1.0, t / 20.0));
    const bool on = std::abs(y.x() - 1.0) < 1e-14 || std::abs(y.y() - 1.0) < 1e-14;
    CHECK(on);
  }
}
