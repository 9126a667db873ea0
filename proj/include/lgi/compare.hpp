#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "lgi/library.hpp"

namespace lgi {

struct CompareReport {
    std::string label;
    std::vector<double> rms;      // per frame, vertex-distance RMS
    std::vector<double> max_err;  // per frame
    std::vector<std::vector<double>> per_vertex;  // heatmap source

    double worst_rms() const;
    double worst_max() const;
};

struct FrameError {
    double rms = 0.0;
    double max_err = 0.0;
    std::vector<double> per_vertex;
};

// Throws on topology (length) mismatch.
FrameError compare_positions(std::span<const Vec3> a, std::span<const Vec3> b);

CompareReport compare_sequences(const std::vector<std::vector<Vec3>>& a,
                                const std::vector<std::vector<Vec3>>& b,
                                const std::string& label);

void save_report_json(const CompareReport& report, const std::string& path);
void save_per_vertex_csv(const CompareReport& report, const std::string& path);

// Unconstrained least-squares blendshape fit over all library shapes: weights
// minimizing the bundle-position error, solved by normal equations with a tiny
// ridge. The classic overfitting comparison point.
std::vector<double> lls_blendshape_fit(const ShapeLibrary& lib,
                                       const std::map<std::string, Vec3>& observed);

// Dense evaluation of arbitrary (possibly non-convex) blendshape weights.
std::vector<Vec3> apply_blend_weights(const ShapeLibrary& lib, std::span<const double> weights);

}  // namespace lgi
