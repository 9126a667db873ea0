#include "lgi/compare.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "lgi/error.hpp"

namespace lgi {

double CompareReport::worst_rms() const {
    double w = 0.0;
    for (double r : rms) w = std::max(w, r);
    return w;
}

double CompareReport::worst_max() const {
    double w = 0.0;
    for (double m : max_err) w = std::max(w, m);
    return w;
}

FrameError compare_positions(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.size() != b.size())
        throw ValidationError("compared meshes have different vertex counts (" +
                              std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    FrameError e;
    e.per_vertex.resize(a.size());
    double sum2 = 0.0;
    for (size_t v = 0; v < a.size(); ++v) {
        const double d = (a[v] - b[v]).norm();
        e.per_vertex[v] = d;
        e.max_err = std::max(e.max_err, d);
        sum2 += d * d;
    }
    e.rms = a.empty() ? 0.0 : std::sqrt(sum2 / static_cast<double>(a.size()));
    return e;
}

CompareReport compare_sequences(const std::vector<std::vector<Vec3>>& a,
                                const std::vector<std::vector<Vec3>>& b,
                                const std::string& label) {
    if (a.size() != b.size())
        throw ValidationError("compared sequences have different frame counts");
    CompareReport report;
    report.label = label;
    for (size_t f = 0; f < a.size(); ++f) {
        FrameError e = compare_positions(a[f], b[f]);
        report.rms.push_back(e.rms);
        report.max_err.push_back(e.max_err);
        report.per_vertex.push_back(std::move(e.per_vertex));
    }
    return report;
}

void save_report_json(const CompareReport& report, const std::string& path) {
    nlohmann::json j;
    j["label"] = report.label;
    j["rms"] = report.rms;
    j["max"] = report.max_err;
    j["worst_rms"] = report.worst_rms();
    j["worst_max"] = report.worst_max();
    std::ofstream out(path);
    if (!out) throw Error("cannot open file for writing: " + path);
    out << j.dump(2) << "\n";
}

void save_per_vertex_csv(const CompareReport& report, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot open file for writing: " + path);
    std::fprintf(f, "frame,vertex,error\n");
    for (size_t fr = 0; fr < report.per_vertex.size(); ++fr)
        for (size_t v = 0; v < report.per_vertex[fr].size(); ++v)
            std::fprintf(f, "%zu,%zu,%.17g\n", fr, v, report.per_vertex[fr][v]);
    std::fclose(f);
}

namespace {

// Dense symmetric solve, partial pivoting.
std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        const double diag = a[col][col];
        if (diag == 0.0) continue;  // ridge keeps this from mattering
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / diag;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
        x[r] = a[r][r] != 0.0 ? s / a[r][r] : 0.0;
    }
    return x;
}

}  // namespace

std::vector<double> lls_blendshape_fit(const ShapeLibrary& lib,
                                       const std::map<std::string, Vec3>& observed) {
    const int ns = static_cast<int>(lib.shapes.size());
    if (ns == 0) return {};

    // Rows: 3 per observed bundle. Columns: one per shape.
    std::vector<std::vector<double>> columns(ns);
    std::vector<double> rhs;
    for (const auto& [name, obs] : observed) {
        const BundleDef* def = lib.find_bundle(name);
        if (!def) throw Error("lls_blendshape_fit: unknown bundle '" + name + "'");
        const Vec3 rest = bundle_rest_position(lib, *def);
        const Vec3 r = obs - rest;
        rhs.push_back(r.x);
        rhs.push_back(r.y);
        rhs.push_back(r.z);
        const auto& tri = lib.neutral.faces[def->attach.face];
        for (int s = 0; s < ns; ++s) {
            Vec3 d;
            for (int i = 0; i < 3; ++i)
                d += lib.shapes[s].disp[tri[i]] * def->attach.bary[i];
            columns[s].push_back(d.x);
            columns[s].push_back(d.y);
            columns[s].push_back(d.z);
        }
    }

    const size_t rows = rhs.size();
    std::vector<std::vector<double>> ata(ns, std::vector<double>(ns, 0.0));
    std::vector<double> atb(ns, 0.0);
    double trace = 0.0;
    for (int i = 0; i < ns; ++i) {
        for (int j = i; j < ns; ++j) {
            double s = 0.0;
            for (size_t r = 0; r < rows; ++r) s += columns[i][r] * columns[j][r];
            ata[i][j] = ata[j][i] = s;
        }
        trace += ata[i][i];
    }
    const double ridge = 1e-12 * std::max(trace, 1.0);
    for (int i = 0; i < ns; ++i) {
        ata[i][i] += ridge;
        for (size_t r = 0; r < rows; ++r) atb[i] += columns[i][r] * rhs[r];
    }
    return solve_linear(std::move(ata), std::move(atb));
}

std::vector<Vec3> apply_blend_weights(const ShapeLibrary& lib, std::span<const double> weights) {
    if (weights.size() != lib.shapes.size())
        throw Error("apply_blend_weights: weight count does not match shape count");
    std::vector<Vec3> out(lib.neutral.positions);
    for (size_t s = 0; s < weights.size(); ++s) {
        if (weights[s] == 0.0) continue;
        for (int v = 0; v < lib.neutral.vertex_count(); ++v)
            out[v] += lib.shapes[s].disp[v] * weights[s];
    }
    return out;
}

}  // namespace lgi
