#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lgi/vec.hpp"

namespace lgi {

// Triangle mesh with one UV per vertex (single chart).
struct TriMesh {
    std::vector<Vec3> positions;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec2> uvs;

    int vertex_count() const { return static_cast<int>(positions.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
    Box3 bounds() const;
    double bbox_diagonal() const { return bounds().diagonal(); }
};

// Point attached to a mesh face by barycentric coordinates.
struct SurfacePoint {
    int face = 0;
    std::array<double, 3> bary{1.0, 0.0, 0.0};
};

// Four distinct point-cloud indices, stored sorted ascending.
struct Tetra {
    std::array<uint32_t, 4> ids{};

    static Tetra canonical(uint32_t a, uint32_t b, uint32_t c, uint32_t d);
    bool operator==(const Tetra& o) const { return ids == o.ids; }
    bool operator<(const Tetra& o) const { return ids < o.ids; }
};

// Throws ValidationError naming the first violated mesh invariant.
void validate_mesh(const TriMesh& mesh);

bool surface_point_valid(const TriMesh& mesh, const SurfacePoint& sp, double tol = 1e-9);

// Barycentric position on (possibly deformed) vertex positions.
Vec3 eval_surface_point(std::span<const Vec3> positions, const TriMesh& mesh,
                        const SurfacePoint& sp);

Vec2 eval_surface_point_uv(const TriMesh& mesh, const SurfacePoint& sp);

double tet_signed_volume(const Vec3& q0, const Vec3& q1, const Vec3& q2, const Vec3& q3);

// Degeneracy threshold, relative so units don't matter.
double tet_volume_epsilon(const Vec3& q0, const Vec3& q1, const Vec3& q2, const Vec3& q3);

// Signed-volume-ratio barycentric weights; throws DegenerateTet below the
// volume epsilon. Weights sum to 1 and may be negative outside the tet.
std::array<double, 4> tet_barycentric(const Vec3& p, const Vec3& q0, const Vec3& q1,
                                      const Vec3& q2, const Vec3& q3);

bool tet_contains(const Vec3& p, const Vec3& q0, const Vec3& q1, const Vec3& q2,
                  const Vec3& q3, double tol = 1e-9);

struct SimplexProjection {
    Vec3 point;
    std::vector<double> weights;  // convex, one per input vertex
    double distance = 0.0;
};

// Closest point on the convex hull of 1..4 vertices. Degenerate simplices
// fall through to their lower-dimensional cases.
SimplexProjection closest_point_on_simplex(const Vec3& p, std::span<const Vec3> verts);

}  // namespace lgi
