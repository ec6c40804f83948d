#include "regmap/config.hpp"

#include "regmap/error.hpp"
#include "regmap/mesh_io.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace regmap {

using nlohmann::json;

namespace {

[[noreturn]] void out_of_range(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::OutOfRange, path + ": " + why);
}

std::string num(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

// Reads fields of one JSON object and remembers which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) out_of_range(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out, double lo, double hi, bool open_lo = false) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number()) out_of_range(path(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x) || x < lo || x > hi || (open_lo && x == lo)) {
      out_of_range(path(key), "value " + v->dump() + " outside " + (open_lo ? "(" : "[") + num(lo) + ", " + num(hi) + "]");
    }
    out = x;
  }

  void integer(const std::string& key, int& out, int lo, int hi) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number_integer()) out_of_range(path(key), "expected an integer");
    const auto x = v->get<long long>();
    if (x < lo || x > hi) {
      out_of_range(path(key), "value " + v->dump() + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    out = static_cast<int>(x);
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_boolean()) out_of_range(path(key), "expected true or false");
    out = v->get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_string()) out_of_range(path(key), "expected a string");
    out = v->get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw Error(ErrorCode::UnknownKey, path(key));
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

PenaltyConfig RunConfig::penalty() const {
  PenaltyConfig p;
  p.eps = eps;
  p.c_exp = c_exp;
  p.kappa_msh = kappa_msh;
  p.xi = xi;
  p.use_jac = use_jac;
  p.use_msh = use_msh;
  p.use_smooth = use_smooth;
  return p;
}

SpaceOptions RunConfig::space_options() const {
  SpaceOptions s;
  s.periodic = periodic;
  s.sigma_beta = sigma_beta;
  return s;
}

OrderingRule RunConfig::ordering_rule() const {
  return ordering == "nearest" ? OrderingRule::Nearest : OrderingRule::Farthest;
}

GreedyOptions RunConfig::greedy_options(int threads) const {
  GreedyOptions g;
  g.n_max = n_max;
  g.tol = tol;
  g.tol_pod = tol_pod;
  g.c_inf = c_inf;
  g.ordering = ordering_rule();
  g.optimizer.max_iterations = max_iterations;
  g.optimizer.grad_tol = grad_tol;
  g.threads = threads;
  return g;
}

RbfOptions RunConfig::rbf_options() const { return {.split = split, .r_min = r_min, .seed = seed}; }

MorphOptions RunConfig::morph_options() const {
  MorphOptions m;
  m.delta = delta;
  m.eps = eps;
  m.c_exp = c_exp;
  m.sigma_beta = sigma_beta;
  m.max_outer = max_outer;
  m.periodic = periodic;
  return m;
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  Reader r(j, "");
  if (const json* p = r.find("paths")) {
    Reader rp(*p, "paths");
    rp.string("mesh", c.paths.mesh);
    rp.string("quality_mesh", c.paths.quality_mesh);
    rp.string("sensors", c.paths.sensors);
    rp.string("snapshots", c.paths.snapshots);
    rp.string("test_snapshots", c.paths.test_snapshots);
    rp.string("state", c.paths.state);
    rp.string("output", c.paths.output);
    rp.finish();
    if (c.paths.output.empty()) out_of_range("paths.output", "must not be empty");
  }
  r.integer("degree", c.degree, 1, 12);
  r.integer("quad_degree", c.quad_degree, -1, 40);
  if (c.quad_degree == 0) out_of_range("quad_degree", "must be -1 or positive");
  r.number("sigma_beta", c.sigma_beta, 0.0, kInf, true);
  r.number("angle_tol", c.angle_tol, 0.0, std::numbers::pi);
  r.boolean("periodic", c.periodic);
  r.integer("quality_refine", c.quality_refine, 0, 6);
  r.integer("quality_degree", c.quality_degree, 1, 12);

  r.number("kappa_msh", c.kappa_msh, 1.0, kInf);
  r.number("eps", c.eps, 0.0, 1.0, true);
  r.number("c_exp", c.c_exp, 0.0, kInf, true);
  r.number("xi", c.xi, 0.0, kInf);
  r.boolean("use_jac", c.use_jac);
  r.boolean("use_msh", c.use_msh);
  r.boolean("use_smooth", c.use_smooth);
  r.number("distributed_weight", c.distributed_weight, 0.0, kInf);
  r.number("pointset_weight", c.pointset_weight, -1.0, kInf);
  if (c.pointset_weight < 0.0 && c.pointset_weight != -1.0) out_of_range("pointset_weight", "must be -1 or >= 0");

  r.integer("n0", c.n0, 1, 1000);
  r.integer("n_max", c.n_max, 1, 1000);
  if (c.n0 > c.n_max) out_of_range("n0", "must not exceed n_max");
  r.number("tol", c.tol, 0.0, kInf, true);
  r.boolean("tol_relative", c.tol_relative);
  r.number("tol_pod", c.tol_pod, 0.0, 1.0);
  r.number("c_inf", c.c_inf, 0.0, kInf, true);
  r.string("ordering", c.ordering);
  if (c.ordering != "farthest" && c.ordering != "nearest") out_of_range("ordering", "expected \"farthest\" or \"nearest\"");
  if (const json* p = r.find("initial_params")) {
    if (!p->is_array()) out_of_range("initial_params", "expected an array of parameter vectors");
    for (std::size_t i = 0; i < p->size(); ++i) {
      const json& v = (*p)[i];
      const std::string at = "initial_params[" + std::to_string(i) + "]";
      if (!v.is_array() || v.empty()) out_of_range(at, "expected a non-empty array of numbers");
      Eigen::VectorXd mu(v.size());
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (!v[k].is_number()) out_of_range(at, "expected numbers");
        mu[static_cast<Eigen::Index>(k)] = v[k].get<double>();
      }
      c.initial_params.push_back(mu);
    }
    if (!c.initial_params.empty() && static_cast<int>(c.initial_params.size()) != c.n0) out_of_range("initial_params", "must list n0 parameters");
  }
  r.integer("max_iterations", c.max_iterations, 1, 1000000);
  r.number("grad_tol", c.grad_tol, 0.0, kInf, true);

  r.number("r_min", c.r_min, -kInf, 1.0);
  r.number("split", c.split, 0.0, 1.0, true);
  if (c.split == 1.0) out_of_range("split", "must leave a test set");
  if (const json* s = r.find("seed")) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0)) {
      out_of_range("seed", "expected a non-negative integer");
    }
    c.seed = s->get<std::uint64_t>();
  }

  r.number("delta", c.delta, 0.0, kInf, true);
  r.integer("max_outer", c.max_outer, 1, 1000);
  r.integer("rom_n_max", c.rom_n_max, 1, 1000);
  r.finish();
  return c;
}

RunConfig validate_config(const std::string& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json params = json::array();
  for (const auto& mu : c.initial_params) params.push_back(std::vector<double>(mu.data(), mu.data() + mu.size()));
  return {
      {"paths",
       {{"mesh", c.paths.mesh},
        {"quality_mesh", c.paths.quality_mesh},
        {"sensors", c.paths.sensors},
        {"snapshots", c.paths.snapshots},
        {"test_snapshots", c.paths.test_snapshots},
        {"state", c.paths.state},
        {"output", c.paths.output}}},
      {"degree", c.degree},
      {"quad_degree", c.quad_degree},
      {"sigma_beta", c.sigma_beta},
      {"angle_tol", c.angle_tol},
      {"periodic", c.periodic},
      {"quality_refine", c.quality_refine},
      {"quality_degree", c.quality_degree},
      {"kappa_msh", c.kappa_msh},
      {"eps", c.eps},
      {"c_exp", c.c_exp},
      {"xi", c.xi},
      {"use_jac", c.use_jac},
      {"use_msh", c.use_msh},
      {"use_smooth", c.use_smooth},
      {"distributed_weight", c.distributed_weight},
      {"pointset_weight", c.pointset_weight},
      {"n0", c.n0},
      {"n_max", c.n_max},
      {"tol", c.tol},
      {"tol_relative", c.tol_relative},
      {"tol_pod", c.tol_pod},
      {"c_inf", c.c_inf},
      {"ordering", c.ordering},
      {"initial_params", params},
      {"max_iterations", c.max_iterations},
      {"grad_tol", c.grad_tol},
      {"r_min", c.r_min},
      {"split", c.split},
      {"seed", c.seed},
      {"delta", c.delta},
      {"max_outer", c.max_outer},
      {"rom_n_max", c.rom_n_max},
  };
}

}  // namespace regmap
