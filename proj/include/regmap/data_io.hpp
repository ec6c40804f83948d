#pragma once

// File formats of the driver:
//   manifest JSON   {"mesh": "p1.json", "entries": [{"mu": [..], "values": "s0.csv", "pointset": "p0.csv"}]}
//                   (paths relative to the manifest; "pointset" optional)
//   node values CSV node_id,value; node ids number the vertices of the linear mesh
//                   file in order of first appearance in its element list
//   point-set CSV   template_x,template_y,target_x,target_y
//   points CSV      x,y
//   curves JSON     {"curves": [{"edge": [[x0, y0], [x1, y1]], "points": [[x, y], ...]}]}
//                   ("edge" optional: the polyline endpoints bind it)

#include "regmap/mesh_morph.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace regmap {

struct ManifestEntry {
  Eigen::VectorXd mu;
  std::string values;
  std::string pointset;
};

struct Manifest {
  std::string mesh;
  std::vector<ManifestEntry> entries;
  std::filesystem::path dir;  ///< base for relative paths

  std::string resolve(const std::string& path) const;
  std::vector<Eigen::VectorXd> params() const;
};

/// Throws InvalidArgument (malformed) or Io.
Manifest read_manifest(const std::string& path);
nlohmann::json to_json(const Manifest& manifest);

/// Exactly one row per node id in [0, n).
Eigen::VectorXd read_node_values(const std::string& path, int n);
void write_node_values(const std::string& path, const Eigen::VectorXd& values);

struct PointPairRow {
  Vec2 source;
  Vec2 target;
};
std::vector<PointPairRow> read_pointset_csv(const std::string& path);
std::vector<Vec2> read_points_csv(const std::string& path);

/// Binds each curve to a boundary edge of `pm` by its declared or implied
/// endpoints (tolerance 1e-8 diam). Throws CurveEdgeMismatch.
std::vector<BoundaryCurve> read_curves(const std::string& path, const PolytopeMesh& pm);

/// Full precision, fixed layout.
std::string format_double(double x);
void write_text(const std::string& path, const std::string& text);

Eigen::VectorXd vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Eigen::VectorXd& v);
/// {"rows", "cols", "data"} with row-major data.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace regmap
