#include "regmap/rom.hpp"

#include "regmap/error.hpp"
#include "regmap/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace regmap {

void SnapshotSet::validate() const {
  if (!mesh) throw Error(ErrorCode::InvalidArgument, "snapshot set has no mesh");
  if (values.rows() != mesh->num_vertices()) {
    throw Error(ErrorCode::InvalidArgument, "snapshots have " + std::to_string(values.rows()) + " rows for " +
                                                std::to_string(mesh->num_vertices()) + " nodes");
  }
  if (static_cast<int>(params.size()) != values.cols()) {
    throw Error(ErrorCode::InvalidArgument, "snapshot and parameter counts differ");
  }
  if (!values.allFinite()) throw Error(ErrorCode::InvalidArgument, "snapshot values must be finite");
}

MappedField map_snapshot(const PolytopeMesh& mesh, const Eigen::VectorXd& u, const PointMap& phi) {
  MappedField out;
  out.values.resize(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const Location loc = mesh.locate_or_nearest(phi(mesh.vertex(i)));
    if (loc.clamped) ++out.clamped;
    const auto& t = mesh.triangle(loc.element);
    out.values[i] = loc.bary[0] * u[t[0]] + loc.bary[1] * u[t[1]] + loc.bary[2] * u[t[2]];
  }
  return out;
}

Eigen::VectorXd lumped_mass(const PolytopeMesh& mesh) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int k = 0; k < mesh.num_elements(); ++k)
    for (int v : mesh.triangle(k)) m[v] += mesh.area(k) / 3.0;
  return m;
}

SparseMatrix consistent_mass(const PolytopeMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const auto& t = mesh.triangle(k);
    const double a = mesh.area(k);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.emplace_back(t[i], t[j], a * (i == j ? 2.0 : 1.0) / 12.0);
  }
  SparseMatrix m(mesh.num_vertices(), mesh.num_vertices());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SparseMatrix boundary_mass(const PolytopeMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int j : mesh.boundary_facets()) {
    const auto& f = mesh.facet(j);
    const double l = f.length;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) trip.emplace_back(f.v[a], f.v[b], l * (a == b ? 2.0 : 1.0) / 6.0);
  }
  SparseMatrix m(mesh.num_vertices(), mesh.num_vertices());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

double relative_error(const SparseMatrix& mass, const Eigen::VectorXd& truth, const Eigen::VectorXd& approx) {
  const Eigen::VectorXd e = truth - approx;
  const double num = std::sqrt(std::max(0.0, e.dot(mass * e)));
  const double den = std::sqrt(std::max(0.0, truth.dot(mass * truth)));
  return den > 0.0 ? num / den : num;
}

SolutionPod::SolutionPod(const Eigen::MatrixXd& snapshots, const Eigen::VectorXd& weights) : weights_(weights) {
  if (weights.size() != snapshots.rows()) throw Error(ErrorCode::InvalidArgument, "POD weights have wrong size");
  if ((weights.array() <= 0.0).any()) throw Error(ErrorCode::InvalidArgument, "POD weights must be positive");
  const Eigen::MatrixXd gram = snapshots.transpose() * weights.asDiagonal() * snapshots;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const int k = static_cast<int>(gram.rows());
  Eigen::VectorXd lam = es.eigenvalues().reverse();
  const Eigen::MatrixXd vec = es.eigenvectors().rowwise().reverse();
  int r = 0;
  const double lmax = k > 0 ? std::max(lam[0], 0.0) : 0.0;
  while (r < k && lam[r] > 1e-14 * lmax && lam[r] > 0.0) ++r;
  eigenvalues_ = lam.head(r);
  modes_ = snapshots * vec.leftCols(r) * lam.head(r).cwiseSqrt().cwiseInverse().asDiagonal();
  // Re-orthonormalize in the weighted inner product.
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < j; ++i) modes_.col(j) -= modes_.col(i).dot(weights_.cwiseProduct(modes_.col(j))) * modes_.col(i);
    modes_.col(j) /= std::sqrt(modes_.col(j).dot(weights_.cwiseProduct(modes_.col(j))));
  }
}

Eigen::VectorXd SolutionPod::coefficients(const Eigen::VectorXd& u, int n) const {
  const int m = std::clamp(n, 0, rank());
  return modes_.leftCols(m).transpose() * weights_.cwiseProduct(u);
}

Eigen::VectorXd SolutionPod::reconstruct(const Eigen::VectorXd& coef) const {
  return modes_.leftCols(coef.size()) * coef;
}

namespace {

struct Pipeline {
  std::vector<Eigen::VectorXd> train_mapped;
  std::vector<Eigen::VectorXd> test_mapped;
};

// Node images under the inverse map; failures keep the node (counted).
std::vector<Vec2> inverse_images(const PolytopeMesh& mesh, const CompositeMap* map, std::atomic<int>& failed) {
  std::vector<Vec2> out(mesh.vertices());
  if (!map) return out;
  for (auto& y : out) {
    try {
      y = map->invert(y);
    } catch (const Error&) {
      ++failed;
    }
  }
  return out;
}

Eigen::VectorXd interpolate_at(const PolytopeMesh& mesh, const Eigen::VectorXd& u, const std::vector<Vec2>& pts,
                               std::atomic<int>& clamped) {
  Eigen::VectorXd out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Location loc = mesh.locate_or_nearest(pts[i]);
    if (loc.clamped) ++clamped;
    const auto& t = mesh.triangle(loc.element);
    out[i] = loc.bary[0] * u[t[0]] + loc.bary[1] * u[t[1]] + loc.bary[2] * u[t[2]];
  }
  return out;
}

}  // namespace

RomComparison compare_roms(const RomProblem& p) {
  p.train.validate();
  p.test.validate();
  if (p.train.mesh != p.test.mesh) throw Error(ErrorCode::InvalidArgument, "train and test meshes differ");
  if (static_cast<int>(p.train_maps.size()) != p.train.size() || static_cast<int>(p.test_maps.size()) != p.test.size()) {
    throw Error(ErrorCode::InvalidArgument, "one registration map per snapshot is required");
  }
  if (p.n_max < 1 || p.n_max > p.train.size()) throw Error(ErrorCode::OutOfRange, "n_max must lie in [1, training count]");
  const PolytopeMesh& mesh = *p.train.mesh;
  const Eigen::VectorXd w = lumped_mass(mesh);
  const SparseMatrix mass = consistent_mass(mesh);
  const SparseMatrix bmass = boundary_mass(mesh);
  const int kt = p.train.size(), ks = p.test.size();
  std::atomic<int> clamped{0};

  RomComparison out;
  for (bool registered : {true, false}) {
    const auto map_of = [&](const std::vector<std::shared_ptr<const CompositeMap>>& maps, int j) {
      return registered ? maps[j].get() : nullptr;
    };
    Eigen::MatrixXd mapped(mesh.num_vertices(), kt);
    parallel_for(kt, p.threads, [&](std::size_t j) {
      const CompositeMap* m = map_of(p.train_maps, static_cast<int>(j));
      if (!m) {
        mapped.col(j) = p.train.values.col(j);
        return;
      }
      const auto f = map_snapshot(mesh, p.train.values.col(j), [&](const Vec2& x) { return m->eval(x); });
      clamped += f.clamped;
      mapped.col(j) = f.values;
    });
    const SolutionPod pod(mapped, w);
    const int nmax = std::min(p.n_max, pod.rank());

    Eigen::MatrixXd coef(kt, nmax);
    for (int j = 0; j < kt; ++j) coef.row(j) = pod.coefficients(mapped.col(j), nmax).transpose();
    const RbfModel rbf = RbfModel::fit(p.train.params, coef, p.rbf);

    std::vector<Eigen::VectorXd> test_mapped(ks);
    std::vector<std::vector<Vec2>> inv(ks);
    parallel_for(ks, p.threads, [&](std::size_t j) {
      const CompositeMap* m = map_of(p.test_maps, static_cast<int>(j));
      inv[j] = inverse_images(mesh, m, clamped);
      if (!m) {
        test_mapped[j] = p.test.values.col(j);
      } else {
        const auto f = map_snapshot(mesh, p.test.values.col(j), [&](const Vec2& x) { return m->eval(x); });
        clamped += f.clamped;
        test_mapped[j] = f.values;
      }
    });

    RomErrors proj, reg;
    for (int n = 1; n <= p.n_max; ++n) {
      double e = 0.0, eb = 0.0, r = 0.0, rb = 0.0;
      for (int j = 0; j < ks; ++j) {
        const Eigen::VectorXd truth = p.test.values.col(j);
        const int nn = std::min(n, nmax);
        const Eigen::VectorXd tp = pod.project(test_mapped[j], nn);
        const Eigen::VectorXd up = interpolate_at(mesh, tp, inv[j], clamped);
        e = std::max(e, relative_error(mass, truth, up));
        eb = std::max(eb, relative_error(bmass, truth, up));
        const Eigen::VectorXd c = rbf.predict(p.test.params[j]).head(nn);
        const Eigen::VectorXd ur = interpolate_at(mesh, pod.reconstruct(c), inv[j], clamped);
        r = std::max(r, relative_error(mass, truth, ur));
        rb = std::max(rb, relative_error(bmass, truth, ur));
      }
      proj.n.push_back(n);
      proj.e_max.push_back(e);
      proj.e_max_bnd.push_back(eb);
      reg.n.push_back(n);
      reg.e_max.push_back(r);
      reg.e_max_bnd.push_back(rb);
    }
    (registered ? out.registered_projection : out.unmapped_projection) = std::move(proj);
    (registered ? out.registered_regression : out.unmapped_regression) = std::move(reg);
  }
  out.clamped = clamped;
  return out;
}

std::string errors_csv(const RomErrors& errors) {
  std::ostringstream os;
  os.precision(10);
  os << "n,E_max,E_max_bnd\n";
  for (std::size_t i = 0; i < errors.n.size(); ++i)
    os << errors.n[i] << ',' << errors.e_max[i] << ',' << errors.e_max_bnd[i] << '\n';
  return os.str();
}

}  // namespace regmap
