#include "regmap/fixtures.hpp"
#include "regmap/mesh_io.hpp"
#include "regmap/objective.hpp"
#include "regmap/simd/kernels.hpp"

#include "test_util.hpp"

#include <Eigen/QR>

#include <cmath>

using namespace regmap;
using namespace regmap::testing;

namespace {

struct Setup {
  GeometricMap gm{semicircle_mesh(3), {.angle_tol = 0.1}};
  DisplacementSpace space{gm.polytope(), 3};
  RegistrationContext ctx;

  explicit Setup(PenaltyConfig cfg = {})
      : ctx(gm, space, cfg, std::make_shared<QualityMesh>(make_quality_mesh(gm, semicircle_mesh(3)))) {}
};

double min_jacobian(const ReducedOperators& ops, const Eigen::VectorXd& b) {
  const Eigen::VectorXd g = ops.grad_q().apply(b);
  double m = 1e300;
  for (Eigen::Index q = 0; q < g.size() / 4; ++q) {
    m = std::min(m, (1.0 + g[4 * q]) * (1.0 + g[4 * q + 3]) - g[4 * q + 1] * g[4 * q + 2]);
  }
  return m;
}

// Random coefficients scaled down until min J reaches `floor`.
Eigen::VectorXd random_valid(const ReducedOperators& ops, double floor) {
  Eigen::VectorXd b(ops.dim());
  for (auto& v : b) v = normal();
  b *= 0.5 / b.norm();
  while (min_jacobian(ops, b) < floor) b *= 0.8;
  return b;
}

template <class F>
double fd_error(F&& f, const Eigen::VectorXd& b, const Eigen::VectorXd& grad, double h = 1e-6) {
  Eigen::VectorXd fd(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    Eigen::VectorXd p = b, m = b;
    p[i] += h;
    m[i] -= h;
    fd[i] = (f(p) - f(m)) / (2.0 * h);
  }
  CHECK(grad.norm() > 0.0);
  return (fd - grad).norm() / std::max(grad.norm(), 1e-300);
}

std::vector<Vec2> random_points(const GeometricMap& gm, int n) {
  std::vector<Vec2> pts;
  const auto& pm = gm.polytope();
  for (int i = 0; i < n; ++i) {
    const int k = std::uniform_int_distribution<int>(0, pm.num_elements() - 1)(rng());
    pts.push_back(gm.eval_reference(k, random_reference_point(0.05)).y);
  }
  return pts;
}

Eigen::VectorXd values_at(const PolytopeQuadrature& quad, const std::function<double(const Vec2&)>& f) {
  Eigen::VectorXd v(quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) v[q] = f(quad.x[q]);
  return v;
}

double weighted_dot(const std::vector<double>& w, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (std::size_t q = 0; q < w.size(); ++q) s += w[q] * a[q] * b[q];
  return s;
}

double smooth_s(const Vec2& x) { return std::sin(2.0 * x.x()) * std::cos(3.0 * x.y()) + x.x() * x.x(); }
Vec2 smooth_ds(const Vec2& x) {
  return {2.0 * std::cos(2.0 * x.x()) * std::cos(3.0 * x.y()) + 2.0 * x.x(),
          -3.0 * std::sin(2.0 * x.x()) * std::sin(3.0 * x.y())};
}

}  // namespace

TEST_CASE("penalty configuration ranges") {
  PenaltyConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.c_exp = 0.2;
  CHECK(error_code_of([&] { cfg.validate(); }) == ErrorCode::OutOfRange);
  cfg = {};
  cfg.xi = -1.0;
  CHECK(error_code_of([&] { cfg.validate(); }) == ErrorCode::OutOfRange);
  cfg = {};
  cfg.kappa_msh = 0.0;
  CHECK(error_code_of([&] { cfg.validate(); }) == ErrorCode::OutOfRange);
}

TEST_CASE("penalties at the identity") {
  Setup s;
  const ReducedOperators ops(s.ctx);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(ops.dim());
  CHECK(std::abs(jacobian_penalty(ops, zero).value / std::exp(-36.0) - 1.0) < 1e-12);
  CHECK(std::abs(mesh_penalty(ops, zero).value / std::exp(-9.0) - 1.0) < 1e-12);
  CHECK(smoothness_penalty(ops, zero).value == 0.0);
  CHECK(std::abs(s.ctx.quadrature().area - s.gm.polytope().total_area()) < 1e-13);

  const FunctionSensor sensor(smooth_s, smooth_ds);
  TemplateSpace tpl(s.ctx.template_weights());
  tpl.add(values_at(s.ctx.quadrature(), [](const Vec2& x) { return x.y(); }));
  const Objective obj(ops, {.sensor = &sensor, .templates = &tpl});
  const double tg = distributed_target(ops, sensor, tpl, zero).value;
  CHECK(tg > 0.0);
  const double xi = s.ctx.config().xi;
  const double jac = jacobian_penalty(ops, zero).value;
  const double msh = mesh_penalty(ops, zero).value;
  CHECK(obj(zero, nullptr) == tg + xi * jac + xi * msh + xi * 0.0);
  const auto bd = obj.breakdown(zero);
  CHECK(bd.smooth == 0.0);
  CHECK(bd.total == obj(zero, nullptr));
}

TEST_CASE("Jacobian barrier value for uniform J = eps") {
  // Uniform scaling of the identity displacement gradient: J = eps everywhere.
  const auto& k = simd::kernels();
  const double e = std::sqrt(0.1) - 1.0;
  std::vector<double> ux(7, e), zero(7, 0.0), w(7, 1.0 / 7.0);
  const simd::BarrierInput in{ux.data(), zero.data(), zero.data(), ux.data(), w.data(), 7, 0.1, 0.025, 40.0};
  CHECK(std::abs(k.jacobian_barrier(in, nullptr).sum - 1.0) < 1e-13);
}

TEST_CASE("gradients match central differences") {
  Setup s;
  const ReducedOperators ops(s.ctx);
  s.ctx.set_pointset(random_points(s.gm, 6));
  const ReducedOperators ops_ps(s.ctx);
  const auto targets = random_points(s.gm, 6);
  const FunctionSensor sensor(smooth_s, smooth_ds);
  TemplateSpace tpl(s.ctx.template_weights());
  tpl.add(values_at(s.ctx.quadrature(), [](const Vec2& x) { return std::cos(x.x()) + x.y(); }));
  tpl.add(values_at(s.ctx.quadrature(), [](const Vec2& x) { return x.x() * x.y(); }));
  const Objective obj(ops_ps, {.sensor = &sensor, .templates = &tpl, .pointset = &targets});

  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd b = random_valid(ops, 0.3);
    CAPTURE(trial);
    {
      const Term t = jacobian_penalty(ops, b);
      CHECK(t.value > 0.0);
      CHECK(fd_error([&](const Eigen::VectorXd& x) { return jacobian_penalty(ops, x, false).value; }, b, t.grad) < 1e-5);
    }
    {
      const Term t = mesh_penalty(ops, b);
      CHECK(t.value > 0.0);
      CHECK(fd_error([&](const Eigen::VectorXd& x) { return mesh_penalty(ops, x, false).value; }, b, t.grad) < 1e-5);
    }
    {
      const Term t = smoothness_penalty(ops, b);
      CHECK(fd_error([&](const Eigen::VectorXd& x) { return smoothness_penalty(ops, x, false).value; }, b, t.grad) <
            1e-5);
    }
    {
      const Term t = pointset_target(ops_ps, targets, b);
      CHECK(fd_error([&](const Eigen::VectorXd& x) { return pointset_target(ops_ps, targets, x, false).value; }, b,
                     t.grad) < 1e-5);
    }
    {
      const Term t = distributed_target(ops, sensor, tpl, b);
      CHECK(fd_error([&](const Eigen::VectorXd& x) { return distributed_target(ops, sensor, tpl, x, false).value; }, b,
                     t.grad) < 1e-5);
    }
    {
      Eigen::VectorXd g;
      obj(b, &g);
      CHECK(fd_error([&](const Eigen::VectorXd& x) { return obj(x, nullptr); }, b, g) < 1e-5);
    }
  }
}

TEST_CASE("smoothness term equals the seminorm of the displacement") {
  Setup s;
  const ReducedOperators ops(s.ctx);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd b = random_valid(ops, 0.3);
    const double direct = s.space.seminorm_P(s.space.field(b));
    CHECK(std::abs(smoothness_penalty(ops, b).value - direct) <= 1e-10 * direct);
    CHECK(smoothness_penalty(ops, Eigen::VectorXd(-b)).value == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("point-set target special cases") {
  Setup s;
  const auto pts = random_points(s.gm, 8);
  s.ctx.set_pointset(pts);
  const ReducedOperators ops(s.ctx);
  const Eigen::VectorXd b = random_valid(ops, 0.5);

  // Exact images Phi(x_i).
  std::vector<Vec2> images;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& pre = s.ctx.pointset_preimages()[i];
    const Vec2 z = s.space.eval_Np(b, pre).y;
    images.push_back(s.gm.eval(z).y);
  }
  CHECK(pointset_target(ops, images, b).value < 1e-24);

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(ops.dim());
  const auto targets = random_points(s.gm, 8);
  double mean = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) mean += (pts[i] - targets[i]).squaredNorm() / pts.size();
  CHECK(std::abs(pointset_target(ops, targets, zero).value - mean) < 1e-12);
  CHECK(error_code_of([&] { pointset_target(ops, std::vector<Vec2>(3), zero); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("distributed target: projection properties") {
  Setup s;
  const ReducedOperators ops(s.ctx);
  const auto& quad = s.ctx.quadrature();
  const auto w = s.ctx.template_weights();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(ops.dim());

  auto t_fn = [](const Vec2& x) { return std::exp(x.x()) * (1.0 + x.y()); };
  auto t_grad = [](const Vec2& x) { return Vec2(std::exp(x.x()) * (1.0 + x.y()), std::exp(x.x())); };
  const Eigen::VectorXd t = values_at(quad, t_fn);

  TemplateSpace tpl(w);
  CHECK(error_code_of([&] { tpl.add(Eigen::VectorXd::Zero(quad.size())); }) == ErrorCode::InvalidArgument);
  tpl.add(t);
  const FunctionSensor same(t_fn, t_grad);
  CHECK(distributed_target(ops, same, tpl, zero).value < 1e-26);

  // s = t + g with g weighted-orthogonal to t.
  const Eigen::VectorXd h = values_at(quad, smooth_s);
  const double c = weighted_dot(w, h, t) / weighted_dot(w, t, t);
  const Eigen::VectorXd g = h - c * t;
  CHECK(std::abs(weighted_dot(w, g, t)) < 1e-12);
  const FunctionSensor sum([&](const Vec2& x) { return smooth_s(x) + (1.0 - c) * t_fn(x); },
                           [&](const Vec2& x) { return Vec2(smooth_ds(x) + (1.0 - c) * t_grad(x)); });
  const double expect = weighted_dot(w, g, g);
  CHECK(std::abs(distributed_target(ops, sum, tpl, zero).value - expect) < 1e-12 * expect);

  // Adding 3 t to the sensor leaves the value unchanged.
  const FunctionSensor shifted([&](const Vec2& x) { return smooth_s(x) + (4.0 - c) * t_fn(x); },
                               [&](const Vec2& x) { return Vec2(smooth_ds(x) + (4.0 - c) * t_grad(x)); });
  CHECK(std::abs(distributed_target(ops, shifted, tpl, zero).value - expect) < 1e-10 * expect);

  // Linearly dependent templates are handled by the pseudo-solve.
  tpl.add(2.0 * t);
  CHECK(std::abs(distributed_target(ops, sum, tpl, zero).value - expect) < 1e-10 * expect);
}

TEST_CASE("P1 sensor and uniform refinement") {
  const PolytopeMesh pm = polytope_from_curved(rectangle_mesh(2, 2, Vec2(0, 0), Vec2(2, 1), 1));
  const PolytopeMesh fine = refine_uniform(pm, 2);
  CHECK(fine.num_elements() == 16 * pm.num_elements());
  CHECK(std::abs(fine.total_area() - 2.0) < 1e-14);
  Eigen::VectorXd v(fine.num_vertices());
  for (int i = 0; i < fine.num_vertices(); ++i) v[i] = 3.0 * fine.vertex(i).x() - fine.vertex(i).y() + 0.5;
  const P1Sensor sensor(std::make_shared<PolytopeMesh>(fine), v);
  for (int t = 0; t < 50; ++t) {
    const Vec2 x(uniform(0, 2), uniform(0, 1));
    const auto sv = sensor.eval(x);
    CHECK(std::abs(sv.value - (3.0 * x.x() - x.y() + 0.5)) < 1e-13);
    CHECK((sv.grad - Vec2(3.0, -1.0)).norm() < 1e-12);
    CHECK_FALSE(sv.clamped);
  }
  const auto out = sensor.eval(Vec2(2.01, 0.5));
  CHECK(out.clamped);
  CHECK(std::abs(out.value - (3.0 * 2.01 - 0.5 + 0.5)) < 1e-12);
  CHECK(error_code_of([&] { P1Sensor(std::make_shared<PolytopeMesh>(fine), Eigen::VectorXd(3)); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("reduced operators through a random orthogonal basis") {
  Setup s;
  const ReducedOperators full(s.ctx);
  const int m = full.dim();
  Eigen::MatrixXd r(m, 4);
  for (int i = 0; i < r.size(); ++i) r.data()[i] = normal();
  const Eigen::MatrixXd w = Eigen::HouseholderQR<Eigen::MatrixXd>(r).householderQ() * Eigen::MatrixXd::Identity(m, 4);
  CHECK((w.transpose() * w - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-12);
  const ReducedOperators red(s.ctx, w);
  const FunctionSensor sensor(smooth_s, smooth_ds);
  TemplateSpace tpl(s.ctx.template_weights());
  tpl.add(values_at(s.ctx.quadrature(), [](const Vec2& x) { return x.x(); }));
  const Objective f_full(full, {.sensor = &sensor, .templates = &tpl});
  const Objective f_red(red, {.sensor = &sensor, .templates = &tpl});
  Eigen::VectorXd b(4);
  for (auto& v : b) v = 0.05 * normal();
  Eigen::VectorXd g_red, g_full;
  const double v_red = f_red(b, &g_red);
  const double v_full = f_full(w * b, &g_full);
  CHECK(std::abs(v_red - v_full) <= 1e-12 * std::abs(v_full));
  CHECK((g_red - w.transpose() * g_full).norm() <= 1e-10 * g_full.norm());
}

TEST_CASE("boundary feature detection") {
  // 12 facets along y = 0; the profile drops from 1.2 to 0.8 in the second half of facet 7.
  std::vector<FacetProfile> chain;
  auto profile = [](double x) { return x < 7.5 ? 1.2 : (x > 8.0 ? 0.8 : 1.2 - 0.8 * (x - 7.5)); };
  for (int j = 0; j < 12; ++j) {
    FacetProfile f;
    f.a = Vec2(j, 0);
    f.b = Vec2(j + 1, 0);
    for (int i = 0; i <= 4; ++i) {
      f.t.push_back(i / 4.0);
      f.values.push_back(profile(j + i / 4.0));
    }
    chain.push_back(f);
  }
  CHECK((detect_shock(chain) - Vec2(7.5, 0.0)).norm() < 1e-15);

  for (auto& f : chain) {
    for (std::size_t i = 0; i < f.t.size(); ++i) f.values[i] = 0.1 * (f.a.x() + f.t[i]);
  }
  CHECK(error_code_of([&] { detect_shock(chain); }) == ErrorCode::NoFeature);

  std::vector<double> bump;
  for (int i = 0; i < 21; ++i) bump.push_back(std::exp(-0.2 * (i - 13) * (i - 13)));
  const auto peaks = local_maxima(bump);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0] == 13);
}
