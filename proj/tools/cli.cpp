#include "cli.hpp"

#include "regmap/config.hpp"
#include "regmap/data_io.hpp"
#include "regmap/error.hpp"
#include "regmap/fixtures.hpp"
#include "regmap/mesh_io.hpp"
#include "regmap/parallel.hpp"
#include "regmap/rom.hpp"
#include "regmap/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <random>

namespace regmap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Carries an exit status through the call stack.
struct Failure {
  int code;
  std::string message;
};

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownKey:
    case ErrorCode::OutOfRange: return kConfig;
    case ErrorCode::Infeasible: return kInfeasible;
    case ErrorCode::NoConvergence:
    case ErrorCode::NonSPD:
    case ErrorCode::SingularMatrix:
    case ErrorCode::LineSearchFailure:
    case ErrorCode::NaNObjective:
    case ErrorCode::DegenerateKernel:
    case ErrorCode::NoFeature: return kSolver;
    default: return kInput;
  }
}

// Config errors of any kind exit with kConfig.
RunConfig load_config(const std::string& path, fs::path& base) {
  try {
    RunConfig c = validate_config(path);
    base = fs::path(path).parent_path();
    return c;
  } catch (const Error& e) {
    throw Failure{kConfig, e.what()};
  }
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  return fs::path(p).is_absolute() ? p : (base / p).lexically_normal().string();
}

std::string require(const fs::path& base, const std::string& p, const char* key) {
  if (p.empty()) throw Failure{kConfig, std::string("paths.") + key + ": required by this command"};
  return resolve(base, p);
}

void write_json_file(const fs::path& path, const json& j) { write_text(path.string(), j.dump(2) + "\n"); }

int thread_count(int flag) { return flag > 0 ? flag : default_threads(); }

Eigen::VectorXd parse_mu(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{kInput, "--mu: cannot parse '" + s + "'"};
    }
  }
  if (v.empty()) throw Failure{kInput, "--mu: empty parameter"};
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::shared_ptr<PolytopeMesh> read_p1_mesh(const std::string& path) {
  const CurvedMesh m = read_curved_mesh(path);
  if (m.degree != 1) throw Error(ErrorCode::InvalidArgument, path + ": expected a linear (degree 1) mesh");
  return std::make_shared<PolytopeMesh>(polytope_from_curved(m));
}

// ---------------------------------------------------------------------------
// Geometry shared by register / map-eval / rom.

struct Geometry {
  std::unique_ptr<GeometricMap> gm;
  std::unique_ptr<DisplacementSpace> space;
};

Geometry load_geometry(const RunConfig& c, const std::string& mesh_path) {
  Geometry g;
  g.gm = std::make_unique<GeometricMap>(read_curved_mesh(mesh_path), GeometricMapOptions{.angle_tol = c.angle_tol});
  g.space = std::make_unique<DisplacementSpace>(g.gm->polytope(), c.degree, c.space_options());
  return g;
}

struct State {
  RunConfig config;
  Geometry geo;
  std::vector<Eigen::VectorXd> params;
  Eigen::MatrixXd full;
  std::unique_ptr<ParametricMap> map;
};

State load_state(const std::string& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path + ": " + e.what());
  }
  State s;
  try {
    s.config = parse_config(j.at("config"));
    const std::string mesh = resolve(fs::path(path).parent_path(), j.at("mesh").get<std::string>());
    s.geo = load_geometry(s.config, mesh);
    for (const auto& mu : j.at("training").at("params")) s.params.push_back(vector_from_json(mu));
    s.full = matrix_from_json(j.at("training").at("coefficients"));
    const Eigen::MatrixXd w = matrix_from_json(j.at("w"));
    const auto& r = j.at("rbf");
    std::vector<Eigen::VectorXd> centers;
    for (const auto& c : r.at("centers")) centers.push_back(vector_from_json(c));
    std::vector<double> r2 = r.at("r2").get<std::vector<double>>();
    std::vector<bool> retained = r.at("retained").get<std::vector<bool>>();
    RbfModel model = RbfModel::from_parts(std::move(centers), matrix_from_json(r.at("weights")),
                                          vector_from_json(r.at("lower")), vector_from_json(r.at("scale")),
                                          vector_from_json(r.at("mean")), std::move(r2), std::move(retained));
    if (w.rows() != s.geo.space->dim() || s.full.rows() != s.geo.space->dim()) {
      throw Error(ErrorCode::InvalidArgument, path + ": coefficient size does not match the displacement space");
    }
    s.map = std::make_unique<ParametricMap>(*s.geo.gm, *s.geo.space, std::move(model), w);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path + ": malformed state: " + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------

int cmd_check(const std::string& mesh_path, double angle_tol, const std::string& out) {
  const GeometricMap gm(read_curved_mesh(mesh_path), {.strict = false, .angle_tol = angle_tol});
  const AdmissibilityReport r = gm.check();
  const json j = {{"admissible", r.admissible},
                  {"violations", r.violations},
                  {"min_jacobian", r.min_jacobian},
                  {"max_vertex_error", r.max_vertex_error},
                  {"max_straight_facet_normal_error", r.max_straight_facet_normal_error},
                  {"max_straight_facet_pointwise_error", r.max_straight_facet_pointwise_error},
                  {"polytope_vertices", r.num_polytope_vertices},
                  {"angular_points", r.num_angular_points},
                  {"fictitious_vertices", r.num_fictitious_vertices},
                  {"elements", gm.polytope().num_elements()},
                  {"degree", gm.degree()},
                  {"angle_tol", angle_tol}};
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) write_json_file(out, j);
  return r.admissible ? kOk : kInput;
}

int cmd_linearize(const std::string& mesh_path, double angle_tol, const std::string& out_dir) {
  const GeometricMap gm(read_curved_mesh(mesh_path), {.strict = true, .angle_tol = angle_tol});
  fs::create_directories(out_dir);
  write_curved_mesh((fs::path(out_dir) / "polytope.json").string(), straight_curved_mesh(gm.polytope(), 1));
  write_curved_mesh((fs::path(out_dir) / "psi.json").string(), gm.curved());
  const auto r = gm.check();
  write_json_file(fs::path(out_dir) / "report.json", {{"admissible", r.admissible},
                                                      {"min_jacobian", r.min_jacobian},
                                                      {"polytope_vertices", r.num_polytope_vertices},
                                                      {"angular_points", r.num_angular_points},
                                                      {"fictitious_vertices", r.num_fictitious_vertices}});
  std::cout << "polytope mesh: " << gm.polytope().num_vertices() << " vertices, " << gm.polytope().num_elements()
            << " elements\n";
  return kOk;
}

int cmd_morph(const std::string& poly_path, const std::string& curves_path, int degree, double delta,
              const std::string& config, const std::string& out) {
  RunConfig c;
  if (!config.empty()) {
    fs::path base;
    c = load_config(config, base);
  }
  if (delta > 0.0) c.delta = delta;
  if (degree > 0) c.degree = degree;
  const CurvedMesh in = read_curved_mesh(poly_path);
  if (in.degree != 1) throw Error(ErrorCode::InvalidArgument, poly_path + ": expected a polytope (degree 1) mesh");
  const PolytopeMesh pm = polytope_from_curved(in);
  const auto curves = read_curves(curves_path, pm);
  const MorphOptions opts = c.morph_options();
  json meta = {{"degree", c.degree},
               {"delta", opts.delta},
               {"initial_guess", "identity"},
               {"method", "augmented Lagrangian, squared-hinge box constraints, L-BFGS inner solves"},
               {"rho0", opts.rho0},
               {"growth", opts.growth},
               {"max_outer", opts.max_outer},
               {"inner_grad_tol", opts.inner.grad_tol},
               {"inner_max_iterations", opts.inner.max_iterations},
               {"curves", curves.size()}};
  const fs::path meta_path = fs::path(out).replace_extension(".meta.json");
  if (!meta_path.parent_path().empty()) fs::create_directories(meta_path.parent_path());
  try {
    const MorphResult r = solve_morph(pm, curves, c.degree, opts);
    write_curved_mesh(out, r.mesh);
    meta["pairs"] = r.pairs.size();
    meta["objective"] = r.objective;
    meta["max_violation"] = r.max_violation;
    meta["min_jacobian"] = r.min_jacobian;
    meta["outer_iterations"] = r.outer_iterations;
    meta["inner_iterations"] = r.inner_iterations;
    meta["final_rho"] = r.final_rho;
    meta["objective_history"] = r.objective_history;
    meta["violation_history"] = r.violation_history;
    meta["status"] = "ok";
    write_json_file(meta_path, meta);
    std::cout << "morph: " << r.pairs.size() << " boundary pairs, max violation " << r.max_violation
              << ", min jacobian " << r.min_jacobian << "\n";
    return kOk;
  } catch (const Error& e) {
    meta["status"] = std::string(e.what());
    write_json_file(meta_path, meta);
    throw;
  }
}

// Initial templates: the given parameters, else the training parameter
// nearest the centroid followed by farthest-first picks.
std::vector<int> initial_indices(const RunConfig& c, const std::vector<Eigen::VectorXd>& params) {
  const int k = static_cast<int>(params.size());
  std::vector<int> out;
  if (!c.initial_params.empty()) {
    for (const auto& mu : c.initial_params) {
      int idx = -1;
      for (int j = 0; j < k; ++j) {
        if (params[j].size() == mu.size() && (params[j] - mu).norm() <= 1e-12 * (1.0 + mu.norm())) idx = j;
      }
      if (idx < 0) throw Failure{kInput, "initial_params: parameter is not in the training set"};
      out.push_back(idx);
    }
    return out;
  }
  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(params.front().size());
  for (const auto& p : params) centroid += p / k;
  const Ordering o = order_parameters(params, centroid, OrderingRule::Nearest);
  out.push_back(o.order.front());
  while (static_cast<int>(out.size()) < std::min(c.n0, k)) {
    int best = -1;
    double bd = -1.0;
    for (int j = 0; j < k; ++j) {
      if (std::find(out.begin(), out.end(), j) != out.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (int s : out) d = std::min(d, (params[j] - params[s]).norm());
      if (d > bd) {
        bd = d;
        best = j;
      }
    }
    out.push_back(best);
  }
  return out;
}

std::string csv_row(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

int cmd_register(const std::string& config_path, int threads_flag) {
  fs::path base;
  const RunConfig c = load_config(config_path, base);
  const std::string mesh_path = require(base, c.paths.mesh, "mesh");
  const std::string sensors_path = require(base, c.paths.sensors, "sensors");
  const fs::path out = resolve(base, c.paths.output);
  fs::create_directories(out);
  write_json_file(out / "config.json", to_json(c));

  Geometry geo = load_geometry(c, mesh_path);
  std::shared_ptr<const QualityMesh> pb;
  if (c.use_msh) {
    CurvedMesh qm = c.paths.quality_mesh.empty() ? physical_curved_mesh(*geo.gm, c.quality_refine, c.quality_degree)
                                                 : read_curved_mesh(resolve(base, c.paths.quality_mesh));
    pb = std::make_shared<QualityMesh>(make_quality_mesh(*geo.gm, std::move(qm)));
  }
  RegistrationContext ctx(*geo.gm, *geo.space, c.penalty(), pb, c.quad_degree);

  const Manifest man = read_manifest(sensors_path);
  GreedyProblem prob;
  prob.context = &ctx;
  prob.params = man.params();
  prob.pointset_weight = c.pointset_weight;
  prob.distributed_weight = c.distributed_weight;
  const bool distributed = std::all_of(man.entries.begin(), man.entries.end(), [](const auto& e) { return !e.values.empty(); });
  const bool pointset = std::all_of(man.entries.begin(), man.entries.end(), [](const auto& e) { return !e.pointset.empty(); });
  if (!distributed && !pointset) throw Failure{kInput, sensors_path + ": every entry needs values and/or a pointset"};
  if (distributed) {
    const auto mesh = read_p1_mesh(man.resolve(man.mesh));
    for (const auto& e : man.entries) {
      prob.sensors.push_back(
          std::make_shared<P1Sensor>(mesh, read_node_values(man.resolve(e.values), mesh->num_vertices())));
    }
  }
  if (pointset) {
    std::vector<Vec2> templates;
    for (std::size_t j = 0; j < man.entries.size(); ++j) {
      const auto rows = read_pointset_csv(man.resolve(man.entries[j].pointset));
      std::vector<Vec2> src, dst;
      for (const auto& r : rows) {
        src.push_back(r.source);
        dst.push_back(r.target);
      }
      if (j == 0) templates = src;
      if (src != templates) throw Failure{kInput, "point sets must share the template points"};
      prob.pointsets.push_back(std::move(dst));
    }
    ctx.set_pointset(templates);
  }
  const auto init = initial_indices(c, prob.params);
  if (distributed) {
    for (int i : init) {
      prob.initial_params.push_back(prob.params[i]);
      prob.initial_sensors.push_back(prob.sensors[i]);
    }
  }

  const int threads = thread_count(threads_flag);
  GreedyOptions opts = c.greedy_options(threads);
  if (c.tol_relative && distributed) {
    const ReducedOperators ops(ctx);
    const Eigen::VectorXd s0 = sensor_at_quadrature(ops, *prob.initial_sensors.front(), Eigen::VectorXd::Zero(ops.dim()));
    const auto w = ctx.template_weights();
    double n2 = 0.0;
    for (std::size_t q = 0; q < w.size(); ++q) n2 += w[q] * s0[q] * s0[q];
    opts.tol = c.tol * n2;
  }
  const GreedyResult res = greedy(prob, opts);
  const RbfModel model = RbfModel::fit(prob.params, res.reduced.transpose(), c.rbf_options());

  // State file.
  const int k = static_cast<int>(prob.params.size());
  json params = json::array(), coef_norm = json::array();
  for (const auto& p : prob.params) params.push_back(to_json(p));
  json centers = json::array();
  for (const auto& x : model.centers()) centers.push_back(to_json(x));
  json box = json::array();
  for (const auto& b : res.box) {
    box.push_back({{"index", b.index}, {"neighbor", b.neighbor}, {"lhs", b.lhs}, {"rhs", b.rhs}, {"ok", b.ok}});
  }
  json history = json::array();
  for (const auto& h : res.history) {
    history.push_back({{"n", h.n}, {"m", h.m}, {"max_target", h.max_target}, {"argmax", h.argmax}, {"targets", h.targets}});
  }
  json selected = json::array();
  for (const auto& p : res.selected_params) selected.push_back(to_json(p));
  std::vector<int> lsf(res.line_search_failed.begin(), res.line_search_failed.end());
  const json state = {
      {"config", to_json(c)},
      {"mesh", fs::relative(fs::absolute(mesh_path), fs::absolute(out)).generic_string()},
      {"tol_effective", opts.tol},
      {"converged", res.converged},
      {"n", res.n},
      {"m", res.w.cols()},
      {"max_target", res.max_target()},
      {"templates", {{"params", selected}, {"training_indices", res.selected_indices}}},
      {"w", matrix_to_json(res.w)},
      {"eigenvalues", to_json(res.eigenvalues)},
      {"ordering", {{"order", res.ordering.order}, {"neighbor", res.ordering.neighbor}}},
      {"training",
       {{"params", params},
        {"targets", res.targets},
        {"unmapped_targets", res.unmapped_targets},
        {"coefficients", matrix_to_json(res.full)},
        {"errors", res.errors},
        {"line_search_failed", lsf}}},
      {"box", box},
      {"box_ok", res.box_ok()},
      {"history", history},
      {"rbf",
       {{"centers", centers},
        {"weights", matrix_to_json(model.weights())},
        {"lower", to_json(model.lower())},
        {"scale", to_json(model.scale())},
        {"mean", to_json(model.fallback())},
        {"r2", model.r2()},
        {"retained", model.retained()},
        {"learning", model.learning()},
        {"testing", model.testing()},
        {"split_seed", c.seed},
        {"degenerate", model.degenerate()}}},
  };
  write_json_file(out / "state.json", state);

  std::string targets = "";
  for (Eigen::Index d = 0; d < prob.params.front().size(); ++d) targets += "mu_" + std::to_string(d) + ",";
  targets += "f_star,coef_norm,unmapped_target,line_search_failed,error\n";
  for (int j = 0; j < k; ++j) {
    std::vector<double> row(prob.params[j].data(), prob.params[j].data() + prob.params[j].size());
    row.push_back(res.targets[j]);
    row.push_back(res.full.col(j).norm());
    row.push_back(res.unmapped_targets[j]);
    targets += csv_row(row) + "," + (res.line_search_failed[j] ? "1" : "0") + "," + (res.errors[j].empty() ? "" : "1") + "\n";
  }
  write_text((out / "targets.csv").string(), targets);
  std::string hist = "n,m,max_target,argmax\n";
  for (const auto& h : res.history) {
    hist += std::to_string(h.n) + "," + std::to_string(h.m) + "," + format_double(h.max_target) + "," +
            std::to_string(h.argmax) + "\n";
  }
  write_text((out / "history.csv").string(), hist);
  std::string bx = "index,neighbor,lhs,rhs,ok\n";
  for (const auto& b : res.box) {
    bx += std::to_string(b.index) + "," + std::to_string(b.neighbor) + "," + format_double(b.lhs) + "," +
          format_double(b.rhs) + "," + (b.ok ? "1" : "0") + "\n";
  }
  write_text((out / "box.csv").string(), bx);

  std::cout << "register: n = " << res.n << ", m = " << res.w.cols() << ", max f* = " << res.max_target()
            << " (tol " << opts.tol << "), " << (res.converged ? "converged" : "NOT converged") << ", box "
            << (res.box_ok() ? "ok" : "violated") << "\n";
  const bool failed = std::any_of(res.errors.begin(), res.errors.end(), [](const std::string& e) { return !e.empty(); });
  if (failed) std::cerr << "registration failed for some parameters; see targets.csv\n";
  return failed || !res.converged ? kSolver : kOk;
}

int cmd_map_eval(const std::string& state_path, const std::string& mu_text, const std::string& points,
                 const std::string& mesh, bool inverse, const std::string& out) {
  if (points.empty() == mesh.empty()) throw Failure{kInput, "map-eval needs exactly one of --points or --mesh"};
  const State s = load_state(state_path);
  const Eigen::VectorXd mu = parse_mu(mu_text);
  if (mu.size() != s.params.front().size()) throw Failure{kInput, "--mu has the wrong dimension"};
  const CompositeMap phi = s.map->at(mu);
  if (!points.empty()) {
    std::string csv = inverse ? "y_x,y_y,x_x,x_y\n" : "x,y,phi_x,phi_y,det\n";
    for (const Vec2& p : read_points_csv(points)) {
      if (inverse) {
        const Vec2 x = phi.invert(p);
        csv += csv_row({p.x(), p.y(), x.x(), x.y()}) + "\n";
      } else {
        Mat2 j;
        const Vec2 y = phi.eval(p, &j);
        csv += csv_row({p.x(), p.y(), y.x(), y.y(), j.determinant()}) + "\n";
      }
    }
    write_text(out, csv);
  } else {
    CurvedMesh m = read_curved_mesh(mesh);
    for (auto& el : m.elements)
      for (auto& p : el) p = inverse ? phi.invert(p) : phi.eval(p);
    write_curved_mesh(out, m);
  }
  return kOk;
}

int cmd_rom(const std::string& config_path, int threads_flag) {
  fs::path base;
  const RunConfig c = load_config(config_path, base);
  const std::string state_path = require(base, c.paths.state, "state");
  const Manifest train = read_manifest(require(base, c.paths.snapshots, "snapshots"));
  const Manifest test = read_manifest(require(base, c.paths.test_snapshots, "test_snapshots"));
  const fs::path out = resolve(base, c.paths.output);
  fs::create_directories(out);
  if (fs::weakly_canonical(train.resolve(train.mesh)) != fs::weakly_canonical(test.resolve(test.mesh))) {
    throw Failure{kInput, "training and test snapshots must share one mesh"};
  }
  const State s = load_state(state_path);
  const auto mesh = read_p1_mesh(train.resolve(train.mesh));

  RomProblem p;
  p.threads = thread_count(threads_flag);
  p.rbf = c.rbf_options();
  for (auto [man, set, maps] : {std::tuple{&train, &p.train, &p.train_maps}, std::tuple{&test, &p.test, &p.test_maps}}) {
    set->mesh = mesh;
    set->params = man->params();
    set->values.resize(mesh->num_vertices(), static_cast<Eigen::Index>(man->entries.size()));
    for (std::size_t j = 0; j < man->entries.size(); ++j) {
      const auto& e = man->entries[j];
      if (e.mu.size() != s.params.front().size()) throw Failure{kInput, "snapshot parameter dimension mismatch"};
      set->values.col(static_cast<Eigen::Index>(j)) = read_node_values(man->resolve(e.values), mesh->num_vertices());
      // Training parameters reuse their optimized coefficients.
      int idx = -1;
      for (std::size_t t = 0; t < s.params.size(); ++t) {
        if ((s.params[t] - e.mu).norm() <= 1e-12 * (1.0 + e.mu.norm())) idx = static_cast<int>(t);
      }
      maps->push_back(idx >= 0 && man == &train
                          ? std::make_shared<CompositeMap>(*s.geo.gm, *s.geo.space, s.full.col(idx))
                          : std::make_shared<CompositeMap>(s.map->at(e.mu)));
    }
  }
  p.n_max = std::min(c.rom_n_max, p.train.size());
  const RomComparison cmp = compare_roms(p);

  const std::array<std::pair<const char*, const RomErrors*>, 4> curves{
      {{"registered_projection", &cmp.registered_projection},
       {"unmapped_projection", &cmp.unmapped_projection},
       {"registered_regression", &cmp.registered_regression},
       {"unmapped_regression", &cmp.unmapped_regression}}};
  json report = {{"config", to_json(c)},
                 {"pod_inner_product", "lumped P1 mass (discrete L2)"},
                 {"error_norm", "consistent P1 mass; boundary: consistent 1D edge mass"},
                 {"train", p.train.size()},
                 {"test", p.test.size()},
                 {"clamped_lookups", cmp.clamped}};
  for (const auto& [name, e] : curves) {
    write_text((out / (std::string("rom_") + name + ".csv")).string(), errors_csv(*e));
    report[name] = {{"n", e->n}, {"E_max", e->e_max}, {"E_max_bnd", e->e_max_bnd}};
  }
  write_json_file(out / "rom_report.json", report);
  const int n3 = std::min(3, p.n_max) - 1;
  std::cout << "rom: E_max at n = " << n3 + 1 << ": registered " << cmp.registered_projection.e_max[n3]
            << ", unmapped " << cmp.unmapped_projection.e_max[n3] << "\n";
  return kOk;
}

// Example inputs: front or wake family on the bulged box, plus a semicircle
// morphing problem.
int cmd_synth(const std::string& family, const std::string& out_dir, int n_train, int n_test, int levels,
              std::uint64_t seed) {
  if (family != "front" && family != "wake") throw Failure{kInput, "--family must be front or wake"};
  if (n_train < 2 || n_test < 1 || levels < 0 || levels > 6) throw Failure{kInput, "synth sizes out of range"};
  const fs::path out(out_dir);
  fs::create_directories(out / "train");
  fs::create_directories(out / "test");
  const double angle_tol = 0.2;
  const CurvedMesh cm = front_domain_mesh(4, 2, 3, 0.1);
  write_curved_mesh((out / "mesh.json").string(), cm);
  const GeometricMap gm(cm, {.angle_tol = angle_tol});
  write_curved_mesh((out / "sensor_mesh.json").string(), straight_curved_mesh(*physical_p1_mesh(gm, levels), 1));
  const auto p1 = read_p1_mesh((out / "sensor_mesh.json").string());

  const FrontFamily front;
  const WakeFamily wake;
  auto field = [&](double mu) {
    return vertex_values(*p1, [&](const Vec2& x) { return family == "front" ? front.value(x, mu) : wake.value(x, mu); });
  };
  auto write_set = [&](const std::string& dir, const std::vector<double>& mus) {
    Manifest m;
    m.mesh = "../sensor_mesh.json";
    for (std::size_t j = 0; j < mus.size(); ++j) {
      char name[32];
      std::snprintf(name, sizeof(name), "u_%03zu.csv", j);
      write_node_values((out / dir / name).string(), field(mus[j]));
      m.entries.push_back({Eigen::VectorXd::Constant(1, mus[j]), name, ""});
    }
    write_json_file(out / dir / "manifest.json", to_json(m));
  };
  std::vector<double> train;
  for (const auto& p : parameter_grid(n_train, 0.0, 1.0)) train.push_back(p[0]);
  std::vector<double> test;
  std::mt19937_64 gen(seed);
  const double h = 1.0 / (n_train - 1);
  while (static_cast<int>(test.size()) < n_test) {
    const double mu = std::uniform_real_distribution<double>(0.02, 0.98)(gen);
    if (std::abs(mu / h - std::round(mu / h)) > 0.1) test.push_back(mu);
  }
  write_set("train", train);
  write_set("test", test);

  RunConfig c;
  c.paths.mesh = "mesh.json";
  c.paths.sensors = "train/manifest.json";
  c.paths.snapshots = "train/manifest.json";
  c.paths.test_snapshots = "test/manifest.json";
  c.paths.state = "out/state.json";
  c.paths.output = "out";
  c.angle_tol = angle_tol;
  c.xi = 1e-2;
  c.tol_relative = true;
  write_json_file(out / "config.json", to_json(c));

  // Semicircle morphing problem.
  const CurvedMesh semi = semicircle_mesh(1, 2);
  write_curved_mesh((out / "morph_polytope.json").string(), semi);
  const PolytopeMesh pm = polytope_from_curved(semi);
  json curves = json::array();
  for (int jf : pm.boundary_facets()) {
    const auto& f = pm.facet(jf);
    const Vec2 a = pm.vertex(f.v[0]), b = pm.vertex(f.v[1]);
    if (std::abs(a.y()) < 1e-14 && std::abs(b.y()) < 1e-14) continue;
    const double t0 = std::atan2(a.y(), a.x()), t1 = std::atan2(b.y(), b.x());
    json pts = json::array();
    for (int i = 0; i <= 256; ++i) {
      const double t = t0 + (t1 - t0) * i / 256.0;
      pts.push_back({std::cos(t), std::sin(t)});
    }
    pts.front() = {a.x(), a.y()};
    pts.back() = {b.x(), b.y()};
    curves.push_back({{"edge", {{a.x(), a.y()}, {b.x(), b.y()}}}, {"points", pts}});
  }
  write_json_file(out / "morph_curves.json", {{"curves", curves}});
  std::cout << "synth: wrote " << n_train << " training and " << n_test << " test snapshots to " << out_dir << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"regmap: registration maps, mesh morphing and Lagrangian model reduction"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: REGMAP_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  std::string mesh, out, config, curves, state, mu, points, eval_mesh, family = "front";
  double angle_tol = 1e-6, delta = 0.0;
  int degree = 0, n_train = 20, n_test = 5, levels = 4;
  std::uint64_t seed = 7;
  bool inverse = false;

  auto* check = app.add_subcommand("check", "admissibility report of a curved mesh");
  check->add_option("mesh", mesh, "curved mesh JSON")->required();
  check->add_option("--angle-tol", angle_tol, "angular-point tolerance (rad)");
  check->add_option("--out", out, "also write the report here");

  auto* lin = app.add_subcommand("linearize", "polytope mesh and Psi descriptor of a curved mesh");
  lin->add_option("mesh", mesh, "curved mesh JSON")->required();
  lin->add_option("--angle-tol", angle_tol, "angular-point tolerance (rad)");
  lin->add_option("--out", out, "output directory")->required();

  auto* morph = app.add_subcommand("morph", "curved mesh from a polytope mesh and boundary curves");
  morph->add_option("polytope", mesh, "polytope mesh JSON (degree 1)")->required();
  morph->add_option("curves", curves, "curves JSON")->required();
  morph->add_option("--degree", degree, "geometric degree")->check(CLI::Range(1, 12));
  morph->add_option("--delta", delta, "box-constraint tolerance")->check(CLI::PositiveNumber);
  morph->add_option("--config", config, "config JSON (penalty constants, defaults)");
  morph->add_option("--out", out, "curved mesh JSON to write")->required();

  auto* reg = app.add_subcommand("register", "greedy registration over a training set");
  reg->add_option("config", config, "config JSON")->required();

  auto* eval = app.add_subcommand("map-eval", "evaluate Phi_mu on points or mesh nodes");
  eval->add_option("state", state, "state JSON written by register")->required();
  eval->add_option("--mu", mu, "parameter, comma separated")->required();
  eval->add_option("--points", points, "points CSV (x,y)");
  eval->add_option("--mesh", eval_mesh, "mesh JSON whose nodes are mapped");
  eval->add_flag("--inverse", inverse, "evaluate Phi_mu^{-1}");
  eval->add_option("--out", out, "output file")->required();

  auto* rom = app.add_subcommand("rom", "registered vs unmapped POD/RBF reduced models");
  rom->add_option("config", config, "config JSON")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic example problem");
  synth->add_option("--family", family, "front or wake");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--train", n_train, "training parameters");
  synth->add_option("--test", n_test, "held-out parameters");
  synth->add_option("--levels", levels, "refinement levels of the snapshot mesh");
  synth->add_option("--seed", seed, "seed of the held-out draw");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*check) return cmd_check(mesh, angle_tol, out);
    if (*lin) return cmd_linearize(mesh, angle_tol, out);
    if (*morph) return cmd_morph(mesh, curves, degree, delta, config, out);
    if (*reg) return cmd_register(config, threads);
    if (*eval) return cmd_map_eval(state, mu, points, eval_mesh, inverse, out);
    if (*rom) return cmd_rom(config, threads);
    if (*synth) return cmd_synth(family, out, n_train, n_test, levels, seed);
  } catch (const Failure& f) {
    std::cerr << "regmap: " << f.message << "\n";
    return f.code;
  } catch (const Error& e) {
    std::cerr << "regmap: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "regmap: " << e.what() << "\n";
    return kInput;
  }
  return kConfig;
}

}  // namespace regmap::cli
