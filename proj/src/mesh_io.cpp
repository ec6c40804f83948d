#include "regmap/mesh_io.hpp"

#include "regmap/error.hpp"

#include <fstream>

namespace regmap {

using nlohmann::json;

namespace {

Vec2 point_from_json(const json& p) {
  if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
    throw Error(ErrorCode::InvalidArgument, "expected a coordinate pair [x, y]");
  }
  return {p[0].get<double>(), p[1].get<double>()};
}

}  // namespace

CurvedMesh curved_mesh_from_json(const json& j) {
  try {
    CurvedMesh m;
    m.degree = j.at("degree").get<int>();
    for (const auto& el : j.at("elements")) {
      std::vector<Vec2> nodes;
      for (const auto& p : el) nodes.push_back(point_from_json(p));
      m.elements.push_back(std::move(nodes));
    }
    if (j.contains("boundary_facets")) {
      for (const auto& b : j.at("boundary_facets")) {
        m.boundary_facets.push_back(
            {b.at("element").get<int>(), b.at("local_facet").get<int>(), b.value("tag", 0)});
      }
    }
    if (j.contains("periodic_pairs")) {
      for (const auto& p : j.at("periodic_pairs")) m.periodic_pairs.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    }
    m.validate_shape();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed mesh: ") + e.what());
  }
}

json to_json(const CurvedMesh& mesh) {
  json j;
  j["degree"] = mesh.degree;
  json els = json::array();
  for (const auto& el : mesh.elements) {
    json nodes = json::array();
    for (const auto& p : el) nodes.push_back({p.x(), p.y()});
    els.push_back(std::move(nodes));
  }
  j["elements"] = std::move(els);
  json bf = json::array();
  for (const auto& b : mesh.boundary_facets) {
    bf.push_back({{"element", b.element}, {"local_facet", b.local_facet}, {"tag", b.tag}});
  }
  j["boundary_facets"] = std::move(bf);
  json pp = json::array();
  for (const auto& p : mesh.periodic_pairs) pp.push_back({p[0], p[1]});
  j["periodic_pairs"] = std::move(pp);
  return j;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << j.dump(1) << "\n";
}

CurvedMesh read_curved_mesh(const std::string& path) { return curved_mesh_from_json(read_json(path)); }

void write_curved_mesh(const std::string& path, const CurvedMesh& mesh) { write_json(path, to_json(mesh)); }

PolytopeMesh polytope_from_curved(const CurvedMesh& mesh) {
  CurvedMesh m = mesh;
  m.validate_shape();
  std::vector<Vec2> corners;
  for (const auto& el : m.elements) {
    for (int i = 0; i < 3; ++i) corners.push_back(el[i]);
  }
  Vec2 lo = corners.front();
  Vec2 hi = corners.front();
  for (const auto& p : corners) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::vector<Vec2> unique;
  const auto id = merge_points(corners, 1e-10 * (hi - lo).norm(), unique);
  std::vector<std::array<int, 3>> tris(m.elements.size());
  for (std::size_t k = 0; k < tris.size(); ++k) tris[k] = {id[3 * k], id[3 * k + 1], id[3 * k + 2]};
  return PolytopeMesh(std::move(unique), std::move(tris), m.boundary_facets, m.periodic_pairs);
}

}  // namespace regmap
