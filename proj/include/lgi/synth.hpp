#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lgi/library.hpp"
#include "lgi/solver.hpp"

namespace lgi {

// Desk-scale stand-in for a captured facial dataset: a rectangular sheet with
// region-localized bump/fold shapes, nonlinear in-betweens and a hinged lower
// region driven by linear blend skinning.
struct SynthConfig {
    int nx = 64, ny = 32;          // vertex grid dims (nx*ny vertices)
    double width = 180.0;          // sheet extent, model units (mm convention)
    double height = 120.0;
    int shapes = 30;               // total, including in-betweens
    int inbetweens = 10;
    int bundles = 40;
    double amplitude = 6.0;        // bump displacement scale
    double nonlinearity = 6.0;     // in-between bulge scale (w(1-w) factor)
    double jaw_fraction = 0.3;     // fraction of shapes with a jaw pose
    uint64_t seed = 1;
};

struct SynthShapeInfo {
    std::string name;
    std::vector<Vec3> expression;  // jaw-factored displacement field
    std::vector<double> profile;   // normalized bump envelope in [0,1]
    JawPose jaw;
    std::string parent;            // extreme this in-between was built from
    double blend_param = 0.0;
};

struct SynthResult {
    ShapeLibrary lib;
    std::vector<SynthShapeInfo> info;  // parallel to lib.shapes
};

SynthResult generate_library(const SynthConfig& cfg);

// Writes manifest.json, neutral.obj, shapes/*.obj, bundles.csv,
// skin_weights.txt under `dir`; load_library(dir + "/manifest.json") round-trips.
void write_library(const SynthResult& synth, const std::string& dir);

struct SynthTrack {
    std::map<int, std::map<std::string, Vec3>> bundles;
    std::map<int, JawPose> jaw;
    std::vector<std::vector<Vec3>> dense;  // ground-truth positions per frame
};

// Smooth random walk through convex shape-weight space (piecewise linear
// between sparse keyframes) with the jaw pose blended alongside.
SynthTrack generate_track(const SynthResult& synth, int frames, uint64_t seed);

// track.csv, jaw.csv and truth_%04d.obj under `dir`.
void write_track(const SynthResult& synth, const SynthTrack& track, const std::string& dir);

// Nonlinear expression between the neutral and `parent` at blend parameter w,
// bulged with a profile the stored shapes do not span. Used to test against
// data the library does not contain.
struct HeldOutExpression {
    std::vector<Vec3> expression;
    JawPose jaw;
    std::vector<Vec3> dense;                // ground-truth positions
    std::map<std::string, Vec3> observed;   // exact bundle positions
};
HeldOutExpression make_heldout(const SynthResult& synth, const std::string& parent, double w);

}  // namespace lgi
