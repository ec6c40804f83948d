#pragma once

// JSON mesh files:
//   {"degree": k,
//    "elements": [[[x, y], ...], ...],          lattice nodes per element
//    "boundary_facets": [{"element": e, "local_facet": f, "tag": t}, ...],
//    "periodic_pairs": [[i, j], ...]}            indices into boundary_facets
// Elements are counter-clockwise; node order as in reference_element.hpp.

#include "regmap/mesh.hpp"

#include <json.hpp>

#include <string>

namespace regmap {

CurvedMesh curved_mesh_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CurvedMesh& mesh);

CurvedMesh read_curved_mesh(const std::string& path);
void write_curved_mesh(const std::string& path, const CurvedMesh& mesh);

/// Degree-1 mesh file -> linear mesh.
PolytopeMesh polytope_from_curved(const CurvedMesh& mesh);

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);

}  // namespace regmap
