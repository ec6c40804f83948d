#include "regmap/optimizer.hpp"

#include "test_util.hpp"

#include <cmath>
#include <limits>

using namespace regmap;
using namespace regmap::testing;

TEST_CASE("L-BFGS on the Rosenbrock function") {
  const ObjectiveFn rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    double f = 0.0;
    if (g) g->setZero(x.size());
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      const double a = x[i + 1] - x[i] * x[i];
      const double b = 1.0 - x[i];
      f += 100.0 * a * a + b * b;
      if (g) {
        (*g)[i] += -400.0 * a * x[i] - 2.0 * b;
        (*g)[i + 1] += 200.0 * a;
      }
    }
    return f;
  };
  Eigen::VectorXd x0(6);
  x0 << -1.2, 1.0, -1.2, 1.0, 0.5, 0.3;
  const auto res = lbfgs(rosen, x0);
  CHECK(res.converged);
  CHECK((res.x - Eigen::VectorXd::Ones(6)).norm() < 1e-6);
  for (std::size_t i = 1; i < res.history.size(); ++i) CHECK(res.history[i] <= res.history[i - 1]);
}

TEST_CASE("L-BFGS on a convex quadratic") {
  Eigen::MatrixXd a(5, 5);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = normal();
  const Eigen::MatrixXd h = a.transpose() * a + Eigen::MatrixXd::Identity(5, 5);
  Eigen::VectorXd c(5);
  for (auto& v : c) v = normal();
  const ObjectiveFn q = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = h * x - c;
    return 0.5 * x.dot(h * x) - c.dot(x);
  };
  const auto res = lbfgs(q, Eigen::VectorXd::Zero(5));
  CHECK(res.converged);
  CHECK((res.x - h.ldlt().solve(c)).norm() < 1e-8);

  const auto at_min = lbfgs(q, h.ldlt().solve(c));
  CHECK(at_min.iterations <= 1);
}

TEST_CASE("L-BFGS guards") {
  const ObjectiveFn bad = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = x;
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK(error_code_of([&] { lbfgs(bad, Eigen::VectorXd::Ones(2)); }) == ErrorCode::NaNObjective);

  // Undefined beyond x = 1: trial points there are rejected.
  const ObjectiveFn wall = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (x[0] >= 1.0) {
      if (g) *g = Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN());
      return std::numeric_limits<double>::quiet_NaN();
    }
    if (g) *g = Eigen::VectorXd::Constant(1, -1.0 / (1.0 - x[0]) + 2.0 * x[0]);
    return std::log(1.0 - x[0]) + x[0] * x[0];
  };
  const auto res = lbfgs(wall, Eigen::VectorXd::Zero(1));
  CHECK(res.x[0] < 1.0);
  CHECK(std::isfinite(res.f));
}
