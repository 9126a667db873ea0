#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lgi/index.hpp"
#include "lgi/library.hpp"

namespace lgi {

struct SolveConfig {
    bool temporal_priority = true;    // prefer tets sharing points with the previous frame
    double containment_tol = 1e-9;    // barycentric slack
    double projection_tie_frac = 1e-9;  // x cloud diagonal
    enum class NeighborAgg { rms, sum, max };
    NeighborAgg aggregation = NeighborAgg::rms;
};

struct BundleSolution {
    std::string bundle;
    std::vector<uint32_t> simplex;          // 1..4 cloud point ids
    std::vector<double> weights_on_points;  // convex, matches simplex
    std::map<std::string, double> shape_weights;  // sparse convex over shape names
    bool projected = false;
    double residual = 0.0;      // measured in the jaw-neutral frame
    Vec3 observed_unskinned;    // recorded so smoothing can recompute residuals
    int bin = 0;                // jaw-bin ordinal; temporal ids only compare within a bin
};

struct FrameSolution {
    int frame = 0;
    std::map<std::string, BundleSolution> per_bundle;
    JawPose jaw;
};

// RMS (or sum/max) distance between the candidate's predicted neighbor-bundle
// positions and their observed positions; 0 with no observed neighbors.
double neighbor_score(const BundleCloud& cloud, const std::vector<uint32_t>& simplex,
                      const std::vector<double>& weights,
                      const std::map<std::string, Vec3>& observed_neighbors,
                      SolveConfig::NeighborAgg agg = SolveConfig::NeighborAgg::rms);

// Cloud points shared with the previous frame's simplex (0 without one).
int temporal_priority(const std::vector<uint32_t>& simplex, const BundleSolution* prev);

// One bundle, one frame: snap to a coincident cloud point, otherwise rank the
// containing tets, otherwise project. `p` is the unskinned observation.
BundleSolution select_candidate(BundleIndex& index, const Vec3& p,
                                const std::map<std::string, Vec3>& observed_neighbors,
                                const BundleSolution* prev, const SolveConfig& cfg = {});

// Unskins every observation under `pose`, solves each bundle (selecting the
// jaw bin containing pose.rot), and fills unobserved bundles with the neutral.
FrameSolution solve_frame(IndexSet& indices, const ShapeLibrary& lib,
                          const std::map<std::string, Vec3>& observed, const JawPose& pose,
                          const FrameSolution* prev, const SolveConfig& cfg = {},
                          int frame = 0);

// Central moving average of the per-bundle shape weights (window truncated at
// the ends, renormalized); jaw poses untouched; residuals recomputed.
std::vector<FrameSolution> smooth_track(const ShapeLibrary& lib,
                                        const std::vector<FrameSolution>& solutions, int window);

// CSV "frame,bundle,x,y,z" (header optional).
std::map<int, std::map<std::string, Vec3>> load_track(const std::string& path);
void save_track(const std::map<int, std::map<std::string, Vec3>>& track,
                const std::string& path);

// CSV "frame,rot,protrude,lateral".
std::map<int, JawPose> load_jaw_track(const std::string& path);
void save_jaw_track(const std::map<int, JawPose>& track, const std::string& path);

// Debug dump of per-frame solutions.
void save_solutions_json(const std::vector<FrameSolution>& solutions, const std::string& path);

}  // namespace lgi
