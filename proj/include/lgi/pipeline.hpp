#pragma once

#include <string>
#include <vector>

#include "lgi/blend.hpp"
#include "lgi/compare.hpp"
#include "lgi/index.hpp"
#include "lgi/solver.hpp"

namespace lgi {

// Rest-pose products shared by index building and reconstruction: the UV grid,
// per-bundle geodesic fields, Voronoi partition, bundle adjacency and the
// natural-neighbor weight field. Computed once per library.
struct BlendProducts {
    UVGrid grid;
    std::vector<std::string> bundle_names;
    std::vector<DistanceField> fields;
    VoronoiPartition partition;
    std::vector<std::vector<int>> adjacency;  // by bundle index
    NNWeightField nn;

    std::vector<std::string> neighbors_of(const std::string& bundle) const;
};

BlendProducts build_blend_products(const ShapeLibrary& lib, int resolution, int threads = 1,
                                   bool with_nn_field = true);

// Per-bundle index build over the whole library (neighbor graph taken from
// the Voronoi adjacency).
IndexSet build_index_set(const ShapeLibrary& lib, const BlendProducts& products,
                         const PruneConfig& prune = {}, const QualityConfig& quality = {},
                         const std::vector<double>& jaw_bin_edges = {}, int threads = 1);

// Full reconstruction of one frame: solve, then blend densely.
std::vector<Vec3> reconstruct_frame(const ShapeLibrary& lib, IndexSet& indices,
                                    const BlendProducts& products,
                                    const std::map<std::string, Vec3>& observed,
                                    const JawPose& pose, FrameSolution* solution_out = nullptr,
                                    const SolveConfig& cfg = {}, int threads = 1);

std::map<std::string, std::map<std::string, double>> frame_weights(const FrameSolution& frame);

struct RoundtripRow {
    std::string shape;
    double rms = 0.0;
    double max_err = 0.0;
    bool unreachable = false;  // pruned out of every bundle cloud
};

// Feeds every library shape's exact bundle positions back through the solver
// and measures the dense reconstruction against the shape itself.
std::vector<RoundtripRow> roundtrip(const ShapeLibrary& lib, IndexSet& indices,
                                    const BlendProducts& products, const SolveConfig& cfg = {},
                                    int threads = 1);

}  // namespace lgi
