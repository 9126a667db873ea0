#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lgi/mesh.hpp"

namespace lgi {

// Reserved shape name for the rest pose (zero displacement).
inline constexpr const char* kNeutralName = "neutral";

// Rotational + prismatic jaw parameters.
struct JawPose {
    double rot = 0.0;       // radians about the hinge axis
    double protrude = 0.0;  // length units along slide_dir
    double lateral = 0.0;   // length units along lateral_dir
};

struct JawModel {
    Vec3 hinge_point;
    Vec3 hinge_axis{1, 0, 0};   // unit
    Vec3 slide_dir{0, -1, 0};   // unit; need not be orthogonal to the axis
    Vec3 lateral_dir{0, 0, 1};  // unit
};

struct Shape {
    std::string name;
    std::vector<Vec3> disp;            // per-vertex displacement from neutral
    std::vector<Vec3> disp_unskinned;  // jaw factored out, computed at load
    JawPose jaw;
    std::set<std::string> tags;
};

struct BundleDef {
    std::string name;
    SurfacePoint attach;  // on the neutral mesh
    std::set<std::string> region_tags;
};

struct ShapeLibrary {
    TriMesh neutral;
    std::vector<Shape> shapes;
    std::vector<BundleDef> bundles;
    std::vector<double> skin_weights;  // per-vertex jaw influence in [0,1]
    JawModel jaw_model;

    double bbox_diag = 0.0;  // neutral bbox diagonal, cached at load

    const Shape* find_shape(const std::string& name) const;
    const BundleDef* find_bundle(const std::string& name) const;
    int shape_index(const std::string& name) const;  // -1 if absent
    void finalize();  // computes caches, unskinned fields, validates
};

// Rigid transform: rotation about (hinge_point, hinge_axis) composed with
// prismatic translation.
Affine jaw_transform(const JawModel& model, const JawPose& pose);

// Per-vertex blend between identity and the jaw transform, weighted by the
// skin weight. Applied as a blended affine matrix.
Affine blended_vertex_transform(const ShapeLibrary& lib, int vertex, const JawPose& pose);

// Blend evaluated at a surface point (skin weight interpolated barycentrically).
Affine blended_surface_transform(const ShapeLibrary& lib, const SurfacePoint& sp,
                                 const JawPose& pose);

// Applies the per-vertex blended transforms to every position. Warns on
// stderr if any blend determinant drops below 1e-6.
std::vector<Vec3> skin_positions(const ShapeLibrary& lib, std::span<const Vec3> positions,
                                 const JawPose& pose);

// Factors the shape's jaw pose out of its displacement so that re-skinning
// with the same pose reproduces the original shape exactly.
std::vector<Vec3> unskin_shape(const ShapeLibrary& lib, const Shape& shape);

// Sparse convex weights over shape names ("neutral" allowed). Empty map means
// all-neutral. Evaluates the blended surface restricted to the bundle's face.
Vec3 eval_bundle(const ShapeLibrary& lib, const BundleDef& bundle,
                 const std::map<std::string, double>& weights, const JawPose& pose);

// Rest position of a bundle on the neutral mesh.
Vec3 bundle_rest_position(const ShapeLibrary& lib, const BundleDef& bundle);

// Loads the JSON manifest (neutral/shape OBJs, bundle CSV, jaw model,
// skin-weight file) and validates every library invariant.
ShapeLibrary load_library(const std::string& manifest_path);

}  // namespace lgi
