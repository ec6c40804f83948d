#include "regmap/data_io.hpp"

#include "regmap/error.hpp"
#include "regmap/mesh_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace regmap {

using nlohmann::json;

namespace {

std::vector<std::vector<double>> read_csv(const std::string& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cell = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw Error(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": non-numeric entry");
    }
    if (row.size() != columns) {
      throw Error(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": expected " +
                                                  std::to_string(columns) + " columns");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Vec2 json_point(const json& p, const std::string& where) {
  if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
    throw Error(ErrorCode::InvalidArgument, where + ": expected [x, y]");
  }
  return {p[0].get<double>(), p[1].get<double>()};
}

}  // namespace

std::string Manifest::resolve(const std::string& path) const {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (dir / p).lexically_normal().string();
}

std::vector<Eigen::VectorXd> Manifest::params() const {
  std::vector<Eigen::VectorXd> out;
  for (const auto& e : entries) out.push_back(e.mu);
  return out;
}

Manifest read_manifest(const std::string& path) {
  const json j = read_json(path);
  Manifest m;
  m.dir = std::filesystem::path(path).parent_path();
  try {
    m.mesh = j.at("mesh").get<std::string>();
    const auto& entries = j.at("entries");
    if (!entries.is_array() || entries.empty()) throw Error(ErrorCode::InvalidArgument, path + ": no entries");
    for (const auto& e : entries) {
      ManifestEntry me;
      me.mu = vector_from_json(e.at("mu"));
      me.values = e.value("values", "");
      me.pointset = e.value("pointset", "");
      if (me.mu.size() == 0) throw Error(ErrorCode::InvalidArgument, path + ": empty parameter");
      if (me.mu.size() != (m.entries.empty() ? me.mu.size() : m.entries.front().mu.size())) {
        throw Error(ErrorCode::InvalidArgument, path + ": parameters of different dimension");
      }
      m.entries.push_back(std::move(me));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path + ": malformed manifest: " + e.what());
  }
  return m;
}

json to_json(const Manifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    json je = {{"mu", to_json(e.mu)}, {"values", e.values}};
    if (!e.pointset.empty()) je["pointset"] = e.pointset;
    entries.push_back(std::move(je));
  }
  return {{"mesh", m.mesh}, {"entries", entries}};
}

Eigen::VectorXd read_node_values(const std::string& path, int n) {
  const auto rows = read_csv(path, 2);
  Eigen::VectorXd v(n);
  std::vector<bool> seen(n, false);
  for (const auto& r : rows) {
    const double id = r[0];
    if (id != std::floor(id) || id < 0 || id >= n) {
      throw Error(ErrorCode::InvalidArgument, path + ": node id " + format_double(id) + " outside [0, " +
                                                  std::to_string(n) + ")");
    }
    const int i = static_cast<int>(id);
    if (seen[i]) throw Error(ErrorCode::InvalidArgument, path + ": node " + std::to_string(i) + " listed twice");
    if (!std::isfinite(r[1])) throw Error(ErrorCode::InvalidArgument, path + ": non-finite value");
    seen[i] = true;
    v[i] = r[1];
  }
  if (static_cast<int>(rows.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, path + ": " + std::to_string(rows.size()) + " values for " +
                                                std::to_string(n) + " nodes");
  }
  return v;
}

void write_node_values(const std::string& path, const Eigen::VectorXd& values) {
  std::string s = "node_id,value\n";
  for (Eigen::Index i = 0; i < values.size(); ++i) s += std::to_string(i) + "," + format_double(values[i]) + "\n";
  write_text(path, s);
}

std::vector<PointPairRow> read_pointset_csv(const std::string& path) {
  std::vector<PointPairRow> out;
  for (const auto& r : read_csv(path, 4)) out.push_back({Vec2(r[0], r[1]), Vec2(r[2], r[3])});
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, path + ": no points");
  return out;
}

std::vector<Vec2> read_points_csv(const std::string& path) {
  std::vector<Vec2> out;
  for (const auto& r : read_csv(path, 2)) out.emplace_back(r[0], r[1]);
  return out;
}

std::vector<BoundaryCurve> read_curves(const std::string& path, const PolytopeMesh& pm) {
  const json j = read_json(path);
  const double tol = 1e-8 * pm.diameter();
  auto vertex_at = [&](const Vec2& p, const std::string& where) {
    int best = -1;
    double bd = tol;
    for (int v = 0; v < pm.num_vertices(); ++v) {
      const double d = (pm.vertex(v) - p).norm();
      if (d <= bd) {
        bd = d;
        best = v;
      }
    }
    if (best < 0) throw Error(ErrorCode::CurveEdgeMismatch, where + ": no mesh vertex at the edge endpoint");
    return best;
  };
  std::vector<BoundaryCurve> out;
  try {
    const auto& curves = j.at("curves");
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const std::string where = path + ": curve " + std::to_string(i);
      const auto& c = curves[i];
      std::vector<Vec2> pts;
      for (const auto& p : c.at("points")) pts.push_back(json_point(p, where));
      if (pts.size() < 2) throw Error(ErrorCode::InvalidArgument, where + ": needs points");
      Vec2 a = pts.front(), b = pts.back();
      if (c.contains("edge")) {
        a = json_point(c["edge"].at(0), where);
        b = json_point(c["edge"].at(1), where);
      }
      out.push_back({{vertex_at(a, where), vertex_at(b, where)}, Polyline(std::move(pts))});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path + ": malformed curves file: " + e.what());
  }
  return out;
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "expected a number array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::InvalidArgument, "expected a number array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
  const auto& d = j.at("data");
  if (static_cast<Eigen::Index>(d.size()) != r * c) throw Error(ErrorCode::InvalidArgument, "matrix data size mismatch");
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = d[static_cast<std::size_t>(i * c + k)].get<double>();
  return m;
}

}  // namespace regmap
