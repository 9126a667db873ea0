#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lgi/library.hpp"
#include "lgi/mesh.hpp"

namespace lgi {

struct PruneConfig {
    double min_disp_frac = 1e-3;   // of the neutral bbox diagonal
    double dedupe_frac = 1e-4;     // of the neutral bbox diagonal
    bool tag_prune = true;
};

struct QualityConfig {
    double min_vol_frac = 1e-6;     // of cloud-diagonal^3
    double max_aspect = 25.0;       // longest edge / min altitude
    double max_extent_frac = 0.75;  // longest edge / cloud diagonal
    uint64_t combinatorial_cap = 250000;
};

// One dataset evaluation of a bundle, in the jaw-neutral frame, plus the
// evaluations of its neighboring bundles on the same shape (the local patch).
struct CloudPoint {
    std::string shape;  // shape name or "neutral"
    Vec3 pos;
    std::map<std::string, Vec3> neighbor_evals;
};

struct BundleCloud {
    std::string bundle;
    std::vector<CloudPoint> points;  // index 0 is always the neutral
    std::optional<std::pair<double, double>> jaw_bin;  // rotation interval

    Box3 bounds() const;
    double diagonal() const { return bounds().diagonal(); }
};

struct TetSet {
    std::vector<Tetra> tets;      // canonical, sorted, unique; overlap expected
    std::vector<double> quality;  // per-tet aspect ratio
    bool projection_only = false;  // fewer than 4 usable points / everything filtered
};

struct UniformGrid {
    Box3 bounds;  // cloud bounds inflated 5%
    std::array<uint32_t, 3> dims{1, 1, 1};
    std::vector<std::vector<uint32_t>> cells;  // tet indices per cell

    int cell_of(const Vec3& p) const;  // -1 when outside bounds
};

// Everything needed to answer queries for one bundle (one jaw bin).
struct BundleIndex {
    BundleCloud cloud;
    TetSet tets;
    UniformGrid grid;
    double dedupe_eps = 0.0;  // solver snap radius, recorded at build
    std::vector<uint64_t> usage;  // per-tet selection counters
    std::vector<Tetra> blacklist;
};

struct IndexSet {
    std::vector<BundleIndex> entries;  // library bundle order, then bin order

    // Entries for one bundle (multiple when jaw-binned).
    std::vector<const BundleIndex*> for_bundle(const std::string& name) const;
    // Entry whose jaw bin contains `rot` (the unbinned entry otherwise).
    const BundleIndex* for_bundle_at(const std::string& name, double rot) const;
    BundleIndex* mutable_for_bundle_at(const std::string& name, double rot);
};

// Dataset evaluations for one bundle: always includes the neutral; prunes
// shapes by region tags and minimum bundle displacement; deduplicates nearby
// points keeping the earliest. `shape_filter`, when non-null, restricts which
// shapes are considered (used by jaw binning).
BundleCloud build_cloud(const ShapeLibrary& lib, const BundleDef& bundle,
                        const PruneConfig& cfg,
                        const std::vector<std::string>& neighbor_bundles,
                        const std::vector<char>* shape_filter = nullptr);

// All 4-point combinations that pass the quality filter. Throws CapExceeded
// when C(n,4) exceeds the cap. Sets projection_only when nothing is kept.
TetSet enumerate_tets(const BundleCloud& cloud, const QualityConfig& cfg);

UniformGrid build_grid(const TetSet& tets, const BundleCloud& cloud);

struct ContainmentHit {
    uint32_t tet = 0;                // index into TetSet::tets
    std::array<double, 4> weights{};  // clamped to >= 0 and renormalized
};

// Every retained tet containing p (tolerance on barycentric weights),
// sorted by tet index; equals brute force over all tets.
std::vector<ContainmentHit> query_containing(const BundleIndex& index, const Vec3& p,
                                             double tol = 1e-9);

struct ProjectionHit {
    std::vector<uint32_t> simplex;  // 1..4 cloud point ids
    std::vector<double> weights;    // convex, matches simplex
    Vec3 point;
    double distance = 0.0;
    int tet = -1;  // tet index when the simplex is a retained tet
};

// Closest point over all retained tets, or over all cloud triangles/edges/
// points when the tet set is empty. Deterministic tie-break by simplex ids.
ProjectionHit project_to_index(const BundleIndex& index, const Vec3& p);

// All projection targets within `tie_tol` of the optimum.
std::vector<ProjectionHit> project_all(const BundleIndex& index, const Vec3& p, double tie_tol);

// Partitions shapes by jaw rotation into [e0,e1),... intervals (first bin
// open below, last closed above); the neutral appears in every bin.
std::vector<BundleCloud> bin_clouds_by_jaw(const ShapeLibrary& lib, const BundleDef& bundle,
                                           const std::vector<double>& bin_edges,
                                           const PruneConfig& cfg,
                                           const std::vector<std::string>& neighbor_bundles);

// Full build for one bundle: cloud(s), tets, grid.
std::vector<BundleIndex> build_bundle_index(const ShapeLibrary& lib, const BundleDef& bundle,
                                            const PruneConfig& prune, const QualityConfig& quality,
                                            const std::vector<double>& jaw_bin_edges,
                                            const std::vector<std::string>& neighbor_bundles);

// Binary cache, magic "LGI1", little-endian. Round-trips bit-exactly.
void save_index(const IndexSet& set, const std::string& path);
IndexSet load_index(const std::string& path);

}  // namespace lgi
