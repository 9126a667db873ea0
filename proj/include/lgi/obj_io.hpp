#pragma once

#include <span>
#include <string>

#include "lgi/mesh.hpp"

namespace lgi {

// ASCII OBJ with `v`, `vt`, `f` records. Faces must be triangles and each
// vertex must carry exactly one texture coordinate (single UV chart); a
// vertex referenced with a mismatched vt index is rejected.
TriMesh load_obj(const std::string& path);

// Writes `positions` against the connectivity/uvs of `mesh` with 9
// significant digits, so save/load round-trips to printed precision.
void save_obj(const TriMesh& mesh, std::span<const Vec3> positions, const std::string& path);

inline void save_obj(const TriMesh& mesh, const std::string& path) {
    save_obj(mesh, mesh.positions, path);
}

}  // namespace lgi
