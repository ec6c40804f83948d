#include "regmap/optimizer.hpp"

#include "regmap/error.hpp"

#include <cmath>
#include <deque>

namespace regmap {

OptimizerResult lbfgs(const ObjectiveFn& f, Eigen::VectorXd x0, const OptimizerOptions& opt) {
  OptimizerResult res;
  const Eigen::Index n = x0.size();
  res.x = std::move(x0);
  Eigen::VectorXd g(n);
  res.f = f(res.x, &g);
  ++res.evaluations;
  if (!std::isfinite(res.f) || !g.allFinite()) throw Error(ErrorCode::NaNObjective, "objective is not finite at the initial point");
  res.history.push_back(res.f);
  if (n == 0) {
    res.converged = true;
    return res;
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd d(n), xt(n), gt(n);
  std::vector<double> alpha(opt.memory);

  for (int it = 0; it < opt.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    d = -g;
    const int m = static_cast<int>(s_hist.size());
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
      d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      d *= 1.0 / std::max(1.0, g.norm());
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha[i] - beta) * s_hist[i];
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g / std::max(1.0, g.norm());
      slope = g.dot(d);
    }
    if (opt.max_step > 0.0 && d.norm() > opt.max_step) {
      const double sc = opt.max_step / d.norm();
      d *= sc;
      slope *= sc;
    }

    double step = 1.0;
    double ft = 0.0;
    bool accepted = false;
    for (int b = 0; b < opt.max_backtracks; ++b) {
      xt = res.x + step * d;
      ft = f(xt, &gt);
      ++res.evaluations;
      if (std::isfinite(ft) && gt.allFinite() && ft <= res.f + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
    const Eigen::VectorXd s = xt - res.x;
    const Eigen::VectorXd y = gt - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      if (static_cast<int>(s_hist.size()) == opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
    }
    const double f_old = res.f;
    res.x = xt;
    res.f = ft;
    g = gt;
    res.iterations = it + 1;
    res.history.push_back(res.f);
    if (opt.rel_f_tol > 0.0 && std::abs(f_old - res.f) <= opt.rel_f_tol * std::max(1.0, std::abs(f_old))) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged && g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) res.converged = true;
  return res;
}

}  // namespace regmap
