#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lgi/library.hpp"
#include "lgi/mesh.hpp"

namespace lgi {

// Rasterized single-chart UV layout. Covered texels are those whose centers
// fall inside some UV triangle; each stores its surface attachment, 3D
// embedding and surface area, so lattice propagation approximates mesh
// geodesics rather than UV distances.
struct UVGrid {
    int resolution = 0;
    std::vector<int32_t> lattice;  // res*res -> covered index, -1 outside chart

    struct Texel {
        int x = 0, y = 0;
        int face = 0;
        std::array<double, 3> bary{};
        Vec3 pos;       // 3D embedding of the texel center
        double area = 0.0;  // 3D surface area of the texel
    };
    std::vector<Texel> texels;
    double max_step = 0.0;  // max embedding distance between adjacent covered texels

    int covered_at(int x, int y) const {
        if (x < 0 || y < 0 || x >= resolution || y >= resolution) return -1;
        return lattice[static_cast<size_t>(y) * resolution + x];
    }
    // Covered texel containing the UV point, or -1.
    int texel_of_uv(const Vec2& uv) const;
    // Nearest covered texel by expanding lattice rings (for boundary vertices).
    int nearest_covered(const Vec2& uv) const;
};

UVGrid rasterize_uv(const TriMesh& mesh, int resolution);

// Distance per covered texel; +inf where unreachable (disconnected chart).
using DistanceField = std::vector<double>;

// Reusable buffers for repeated (local) marches.
struct MarchScratch {
    std::vector<double> dist;
    std::vector<uint8_t> state;
    std::vector<int> touched;
};

// Wavefront propagation over the 8-connected covered-texel lattice with 3D
// embedding edge lengths, seeded at a surface point. Alias-free discrete
// geodesics: the front expands in accepted order like fast marching.
DistanceField fast_march(const UVGrid& grid, const Vec2& seed_uv, const Vec3& seed_pos);

inline DistanceField fast_march(const UVGrid& grid, const TriMesh& mesh,
                                const SurfacePoint& seed) {
    return fast_march(grid, eval_surface_point_uv(mesh, seed),
                      eval_surface_point(mesh.positions, mesh, seed));
}

// Same propagation but stops beyond `limit`; appends (texel, distance) pairs.
void fast_march_local(const UVGrid& grid, const Vec2& seed_uv, const Vec3& seed_pos,
                      double limit, MarchScratch& scratch,
                      std::vector<std::pair<int, double>>& out);

struct VoronoiPartition {
    std::vector<int32_t> owner;      // per covered texel, nearest bundle
    std::vector<double> distance;    // distance to the owner
    std::vector<double> runner_up_gap;  // second-best minus best (inf with one site)
};

// Argmin over per-bundle distance fields; exact ties go to the smaller name.
VoronoiPartition voronoi_partition(const std::vector<DistanceField>& fields,
                                   const std::vector<std::string>& bundle_names);

// Bundles whose Voronoi cells share a texel edge (4-neighborhood).
std::vector<std::vector<int>> bundle_adjacency(const UVGrid& grid,
                                               const VoronoiPartition& partition,
                                               int bundle_count);

// Per-vertex sparse convex weights over bundles.
struct NNWeightField {
    std::vector<std::string> bundles;
    std::vector<std::vector<std::pair<uint32_t, double>>> vertex_weights;
    std::vector<uint8_t> flagged;  // zero-stolen-area fallbacks

    double weight(int vertex, uint32_t bundle) const {
        for (const auto& [b, w] : vertex_weights[vertex])
            if (b == bundle) return w;
        return 0.0;
    }
};

struct NNConfig {
    int threads = 1;
    // Insertion-distance override (seed uv, seed pos, limit, scratch, out);
    // defaults to a lattice march restricted to the stolen region. Tests use
    // this to supply exact planar metrics.
    std::function<void(const UVGrid&, const Vec2&, const Vec3&, double, MarchScratch&,
                       std::vector<std::pair<int, double>>&)>
        local_distance;
};

// Discrete natural neighbor weights: each mesh vertex is inserted into the
// precomputed Voronoi diagram; weights are the 3D areas its cell steals from
// each neighboring cell, normalized by the total stolen area.
NNWeightField natural_neighbor_field(const UVGrid& grid, const VoronoiPartition& partition,
                                     const std::vector<DistanceField>& fields,
                                     const std::vector<std::string>& bundle_names,
                                     const TriMesh& mesh, const NNConfig& cfg = {});

// Gaussian RBF on the same geodesic fields, normalized per vertex. Does not
// interpolate the bundles; kept as the comparison variant.
NNWeightField rbf_blend_field(const UVGrid& grid, const std::vector<DistanceField>& fields,
                              const std::vector<std::string>& bundle_names, const TriMesh& mesh,
                              double sigma);

// Dense reconstruction: per vertex, bundle solutions blended by the weight
// field, then the jaw transform applied.
std::vector<Vec3> blend_frame(const ShapeLibrary& lib, const NNWeightField& nn,
                              const std::map<std::string, std::map<std::string, double>>&
                                  bundle_shape_weights,
                              const JawPose& pose, int threads = 1);

// Smooth-displacement baseline: bundle deltas from the jaw-skinned neutral,
// interpolated across the mesh by the weight field. No dataset detail.
std::vector<Vec3> baseline_displacement_interp(const ShapeLibrary& lib, const NNWeightField& nn,
                                               const std::map<std::string, Vec3>& observed,
                                               const JawPose& pose);

// Binary cache, magic "LGNN".
void save_nn_field(const NNWeightField& nn, const std::string& path);
NNWeightField load_nn_field(const std::string& path);

// Debug images (binary PGM).
void save_voronoi_pgm(const UVGrid& grid, const VoronoiPartition& partition, int bundle_count,
                      const std::string& path);
void save_weight_pgm(const UVGrid& grid, const TriMesh& mesh, const NNWeightField& nn,
                     uint32_t bundle, const std::string& path);

}  // namespace lgi
