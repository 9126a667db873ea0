#include "lgi/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "lgi/error.hpp"

namespace lgi {

Box3 TriMesh::bounds() const {
    Box3 b;
    for (const Vec3& p : positions) b.expand(p);
    return b;
}

Tetra Tetra::canonical(uint32_t a, uint32_t b, uint32_t c, uint32_t d) {
    Tetra t{{a, b, c, d}};
    std::sort(t.ids.begin(), t.ids.end());
    return t;
}

void validate_mesh(const TriMesh& mesh) {
    const int nv = mesh.vertex_count();
    if (nv == 0) throw ValidationError("mesh has no vertices");
    if (mesh.faces.empty()) throw ValidationError("mesh has no faces");
    if (static_cast<int>(mesh.uvs.size()) != nv)
        throw ValidationError("mesh is missing per-vertex UVs");

    std::vector<char> referenced(nv, 0);
    const double area_eps = 1e-12 * mesh.bbox_diagonal() * mesh.bbox_diagonal();
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int i = 0; i < 3; ++i) {
            if (tri[i] < 0 || tri[i] >= nv)
                throw ValidationError("face " + std::to_string(f) + " references vertex " +
                                      std::to_string(tri[i]) + " out of range");
            referenced[tri[i]] = 1;
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw ValidationError("face " + std::to_string(f) + " repeats a vertex");
        const Vec3 e1 = mesh.positions[tri[1]] - mesh.positions[tri[0]];
        const Vec3 e2 = mesh.positions[tri[2]] - mesh.positions[tri[0]];
        if (e1.cross(e2).norm() <= area_eps)
            throw ValidationError("face " + std::to_string(f) + " is degenerate (zero area)");
    }
    for (int v = 0; v < nv; ++v)
        if (!referenced[v])
            throw ValidationError("vertex " + std::to_string(v) + " is not referenced by any face");
}

bool surface_point_valid(const TriMesh& mesh, const SurfacePoint& sp, double tol) {
    if (sp.face < 0 || sp.face >= mesh.face_count()) return false;
    double sum = 0.0;
    for (double b : sp.bary) {
        if (b < -tol) return false;
        sum += b;
    }
    return std::abs(sum - 1.0) <= tol;
}

Vec3 eval_surface_point(std::span<const Vec3> positions, const TriMesh& mesh,
                        const SurfacePoint& sp) {
    if (sp.face < 0 || sp.face >= mesh.face_count())
        throw Error("surface point face " + std::to_string(sp.face) + " out of range");
    const auto& tri = mesh.faces[sp.face];
    if (positions.size() != mesh.positions.size())
        throw Error("position array length does not match mesh vertex count");
    return positions[tri[0]] * sp.bary[0] + positions[tri[1]] * sp.bary[1] +
           positions[tri[2]] * sp.bary[2];
}

Vec2 eval_surface_point_uv(const TriMesh& mesh, const SurfacePoint& sp) {
    const auto& tri = mesh.faces.at(sp.face);
    return mesh.uvs[tri[0]] * sp.bary[0] + mesh.uvs[tri[1]] * sp.bary[1] +
           mesh.uvs[tri[2]] * sp.bary[2];
}

double tet_signed_volume(const Vec3& q0, const Vec3& q1, const Vec3& q2, const Vec3& q3) {
    return (q1 - q0).dot((q2 - q0).cross(q3 - q0)) / 6.0;
}

double tet_volume_epsilon(const Vec3& q0, const Vec3& q1, const Vec3& q2, const Vec3& q3) {
    Box3 b;
    b.expand(q0); b.expand(q1); b.expand(q2); b.expand(q3);
    const double d = b.diagonal();
    return 1e-12 * d * d * d;
}

std::array<double, 4> tet_barycentric(const Vec3& p, const Vec3& q0, const Vec3& q1,
                                      const Vec3& q2, const Vec3& q3) {
    const double vol = tet_signed_volume(q0, q1, q2, q3);
    if (std::abs(vol) <= tet_volume_epsilon(q0, q1, q2, q3))
        throw DegenerateTet("tet volume below degeneracy threshold");
    return {tet_signed_volume(p, q1, q2, q3) / vol, tet_signed_volume(q0, p, q2, q3) / vol,
            tet_signed_volume(q0, q1, p, q3) / vol, tet_signed_volume(q0, q1, q2, p) / vol};
}

bool tet_contains(const Vec3& p, const Vec3& q0, const Vec3& q1, const Vec3& q2,
                  const Vec3& q3, double tol) {
    const auto w = tet_barycentric(p, q0, q1, q2, q3);
    return w[0] >= -tol && w[1] >= -tol && w[2] >= -tol && w[3] >= -tol;
}

namespace {

SimplexProjection project_vertex(const Vec3& p, const Vec3& a) {
    return {a, {1.0}, (p - a).norm()};
}

SimplexProjection project_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = ab.norm2();
    if (len2 <= 0.0) {
        auto r = project_vertex(p, a);
        r.weights = {1.0, 0.0};
        return r;
    }
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    const Vec3 q = a + ab * t;
    return {q, {1.0 - t, t}, (p - q).norm()};
}

// Ericson-style closest point on a triangle, tracking barycentric weights.
SimplexProjection project_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a;

    // Degenerate triangle: best of the three edges.
    const double area2 = ab.cross(ac).norm2();
    const double scale2 = std::max({ab.norm2(), ac.norm2(), (c - b).norm2(), 1e-300});
    if (area2 <= 1e-24 * scale2 * scale2) {
        SimplexProjection best;
        best.distance = std::numeric_limits<double>::max();
        const std::array<std::array<int, 2>, 3> edges{{{0, 1}, {0, 2}, {1, 2}}};
        const std::array<Vec3, 3> v{a, b, c};
        for (const auto& e : edges) {
            auto r = project_segment(p, v[e[0]], v[e[1]]);
            if (r.distance < best.distance) {
                std::vector<double> w(3, 0.0);
                w[e[0]] = r.weights[0];
                w[e[1]] = r.weights[1];
                best = {r.point, std::move(w), r.distance};
            }
        }
        return best;
    }

    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {a, {1, 0, 0}, (p - a).norm()};

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {b, {0, 1, 0}, (p - b).norm()};

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double t = d1 / (d1 - d3);
        const Vec3 q = a + ab * t;
        return {q, {1.0 - t, t, 0.0}, (p - q).norm()};
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {c, {0, 0, 1}, (p - c).norm()};

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double t = d2 / (d2 - d6);
        const Vec3 q = a + ac * t;
        return {q, {1.0 - t, 0.0, t}, (p - q).norm()};
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        const Vec3 q = b + (c - b) * t;
        return {q, {0.0, 1.0 - t, t}, (p - q).norm()};
    }

    const double denom = va + vb + vc;
    const double v = vb / denom, w = vc / denom;
    const Vec3 q = a + ab * v + ac * w;
    return {q, {1.0 - v - w, v, w}, (p - q).norm()};
}

SimplexProjection project_tet(const Vec3& p, const Vec3& q0, const Vec3& q1, const Vec3& q2,
                              const Vec3& q3) {
    const double vol = tet_signed_volume(q0, q1, q2, q3);
    if (std::abs(vol) > tet_volume_epsilon(q0, q1, q2, q3)) {
        const auto w = tet_barycentric(p, q0, q1, q2, q3);
        if (w[0] >= 0.0 && w[1] >= 0.0 && w[2] >= 0.0 && w[3] >= 0.0)
            return {p, {w[0], w[1], w[2], w[3]}, 0.0};
    }
    // Outside (or flat): best of the four faces.
    SimplexProjection best;
    best.distance = std::numeric_limits<double>::max();
    const std::array<Vec3, 4> v{q0, q1, q2, q3};
    const std::array<std::array<int, 3>, 4> faces{{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}}};
    for (const auto& f : faces) {
        auto r = project_triangle(p, v[f[0]], v[f[1]], v[f[2]]);
        if (r.distance < best.distance) {
            std::vector<double> w(4, 0.0);
            for (int i = 0; i < 3; ++i) w[f[i]] = r.weights[i];
            best = {r.point, std::move(w), r.distance};
        }
    }
    return best;
}

}  // namespace

SimplexProjection closest_point_on_simplex(const Vec3& p, std::span<const Vec3> verts) {
    switch (verts.size()) {
        case 1: return project_vertex(p, verts[0]);
        case 2: return project_segment(p, verts[0], verts[1]);
        case 3: return project_triangle(p, verts[0], verts[1], verts[2]);
        case 4: return project_tet(p, verts[0], verts[1], verts[2], verts[3]);
        default: throw Error("closest_point_on_simplex expects 1..4 vertices");
    }
}

}  // namespace lgi
