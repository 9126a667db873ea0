#include "lgi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"
#include "lgi/error.hpp"
#include "lgi/obj_io.hpp"

namespace lgi {

namespace {

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(uint64_t seed) : gen(seed) {}
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen);
    }
    int below(int n) { return static_cast<int>(gen() % static_cast<uint64_t>(n)); }
};

double bundle_rest_position_y(const ShapeLibrary& lib, const BundleDef& b) {
    return eval_surface_point(lib.neutral.positions, lib.neutral, b.attach).y;
}

// C1 compact bump, support r < r0.
double bump(double r, double r0) {
    if (r >= r0) return 0.0;
    const double t = 1.0 - (r / r0) * (r / r0);
    return t * t;
}

struct Bump {
    Vec2 center;
    double radius;
    Vec3 dir;
};

}  // namespace

SynthResult generate_library(const SynthConfig& cfg) {
    if (cfg.nx < 4 || cfg.ny < 4) throw ValidationError("synth grid must be at least 4x4");
    if (cfg.shapes < 2) throw ValidationError("synth needs at least 2 shapes");
    if (cfg.inbetweens < 0 || cfg.inbetweens >= cfg.shapes)
        throw ValidationError("in-between count must be in [0, shapes)");
    if (cfg.bundles < 4) throw ValidationError("synth needs at least 4 bundles");
    if (cfg.jaw_fraction < 0.0 || cfg.jaw_fraction > 1.0)
        throw ValidationError("jaw fraction must be in [0,1]");

    Rng rng(cfg.seed);
    SynthResult out;
    ShapeLibrary& lib = out.lib;

    // Sheet mesh with trivial single-chart UVs.
    const int nx = cfg.nx, ny = cfg.ny;
    const double W = cfg.width, H = cfg.height;
    lib.neutral.positions.reserve(static_cast<size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double u = static_cast<double>(i) / (nx - 1);
            const double v = static_cast<double>(j) / (ny - 1);
            lib.neutral.positions.push_back({u * W, v * H, 0.0});
            lib.neutral.uvs.push_back({u, v});
        }
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            const int v00 = j * nx + i, v10 = v00 + 1, v01 = v00 + nx, v11 = v01 + 1;
            lib.neutral.faces.push_back({v00, v10, v11});
            lib.neutral.faces.push_back({v00, v11, v01});
        }

    // Hinged lower region: full influence below y0, none above y1.
    const double y0 = 0.25 * H, y1 = 0.45 * H;
    lib.skin_weights.resize(lib.neutral.vertex_count());
    for (int v = 0; v < lib.neutral.vertex_count(); ++v) {
        const double y = lib.neutral.positions[v].y;
        double s;
        if (y <= y0) {
            s = 1.0;
        } else if (y >= y1) {
            s = 0.0;
        } else {
            const double t = (y - y0) / (y1 - y0);
            s = 1.0 - t * t * (3.0 - 2.0 * t);
        }
        lib.skin_weights[v] = s;
    }
    lib.jaw_model.hinge_point = {W / 2.0, y1, 0.0};
    lib.jaw_model.hinge_axis = {1, 0, 0};
    lib.jaw_model.slide_dir = {0, -1, 0};
    lib.jaw_model.lateral_dir = {1, 0, 0};

    // Bundles on a jittered grid of vertices (border included, so no part of
    // the sheet is far from a marker), attached at a vertex corner so every
    // bundle site coincides with a mesh vertex.
    auto vertex_attach = [&](int i, int j) {
        SurfacePoint sp;
        if (i < nx - 1 && j < ny - 1) {
            sp = {2 * (j * (nx - 1) + i), {1, 0, 0}};  // v00 of quad (i,j)
        } else if (i == nx - 1 && j < ny - 1) {
            sp = {2 * (j * (nx - 1) + i - 1), {0, 1, 0}};  // v10 of quad (i-1,j)
        } else if (i < nx - 1) {
            sp = {2 * ((j - 1) * (nx - 1) + i) + 1, {0, 0, 1}};  // v01 of quad (i,j-1)
        } else {
            sp = {2 * ((j - 1) * (nx - 1) + i - 1), {0, 0, 1}};  // v11 of quad (i-1,j-1)
        }
        return sp;
    };
    const int cells_x = static_cast<int>(std::ceil(std::sqrt(cfg.bundles * (W / H))));
    const int cells_y = (cfg.bundles + cells_x - 1) / cells_x;
    std::vector<char> taken(static_cast<size_t>(nx) * ny, 0);
    int made = 0;
    for (int cy = 0; cy < cells_y && made < cfg.bundles; ++cy)
        for (int cx = 0; cx < cells_x && made < cfg.bundles; ++cx) {
            const int ilo = cx * (nx - 1) / cells_x;
            const int ihi = std::max(ilo, (cx + 1) * (nx - 1) / cells_x - (cx + 1 < cells_x));
            const int jlo = cy * (ny - 1) / cells_y;
            const int jhi = std::max(jlo, (cy + 1) * (ny - 1) / cells_y - (cy + 1 < cells_y));
            int i = ilo + (ihi > ilo ? rng.below(ihi - ilo + 1) : 0);
            int j = jlo + (jhi > jlo ? rng.below(jhi - jlo + 1) : 0);
            if (taken[static_cast<size_t>(j) * nx + i]) continue;
            taken[static_cast<size_t>(j) * nx + i] = 1;

            BundleDef b;
            char name[16];
            std::snprintf(name, sizeof(name), "b%03d", made);
            b.name = name;
            b.attach = vertex_attach(i, j);
            lib.bundles.push_back(std::move(b));
            ++made;
        }
    if (made < cfg.bundles)
        throw ValidationError("could not place the requested number of bundles on the grid");

    // Region-confined shapes stay strictly on their half of the sheet; a
    // bundle is single-tagged only when it is far enough from the midline
    // that its natural-neighbor influence cannot reach the other region.
    const double spacing = std::sqrt(W * H / cfg.bundles);
    const double margin = 2.0 * spacing;
    for (auto& b : lib.bundles) {
        const double y = bundle_rest_position_y(lib, b);
        if (y < H / 2.0 - margin) {
            b.region_tags = {"lower"};
        } else if (y > H / 2.0 + margin) {
            b.region_tags = {"upper"};
        } else {
            b.region_tags = {"lower", "upper"};
        }
    }

    const int n_extremes = cfg.shapes - cfg.inbetweens;
    const int n_jaw = static_cast<int>(std::lround(cfg.jaw_fraction * cfg.shapes));
    int jaw_assigned = 0;

    auto make_extreme = [&](int k) {
        SynthShapeInfo info;
        char name[16];
        std::snprintf(name, sizeof(name), "shape%02d", k);
        info.name = name;
        info.expression.assign(lib.neutral.vertex_count(), Vec3{});
        info.profile.assign(lib.neutral.vertex_count(), 0.0);

        // The first two shapes are global low-frequency waves so every bundle
        // sees distinct, non-coplanar evaluations even at the sheet corners.
        if (k < 2) {
            const double f1 = 1.0 + k, f2 = 2.0 - 0.5 * k;
            const double phase1 = rng.uniform(0.0, 2.0 * M_PI);
            const double phase2 = rng.uniform(0.0, 2.0 * M_PI);
            double peak = 0.0;
            for (int v = 0; v < lib.neutral.vertex_count(); ++v) {
                const Vec3& p = lib.neutral.positions[v];
                const double s1 = std::sin(2.0 * M_PI * f1 * p.x / W + phase1);
                const double s2 = std::sin(2.0 * M_PI * f2 * p.y / H + phase2);
                info.expression[v] = {0.15 * cfg.amplitude * s2, 0.15 * cfg.amplitude * s1,
                                      0.4 * cfg.amplitude * s1 * s2};
                peak = std::max(peak, info.expression[v].norm());
            }
            for (int v = 0; v < lib.neutral.vertex_count(); ++v)
                info.profile[v] = info.expression[v].norm() / peak;
            Shape shape;
            shape.name = info.name;
            shape.tags = {"lower", "upper"};
            out.info.push_back(std::move(info));
            lib.shapes.push_back(std::move(shape));
            return;
        }

        // Most shapes span both regions; every fourth pair is confined to one
        // half of the sheet so tag pruning stays exact. Bumps are anchored at
        // bundle sites so every feature in a shape is sampled by a marker.
        const int region = k % 4;  // 0 lower, 1 upper, else both
        std::set<std::string> tags{"lower", "upper"};
        if (region == 0) tags = {"lower"};
        if (region == 1) tags = {"upper"};
        const int nbumps = region < 2 ? 3 + rng.below(2) : 4 + rng.below(3);
        std::vector<Bump> bumps;
        for (int b = 0; b < nbumps; ++b) {
            Bump bp;
            bp.radius = (region >= 2 && b == 0 ? rng.uniform(1.2, 1.8)
                                               : rng.uniform(0.6, 1.2)) *
                        spacing;
            std::vector<Vec2> anchors;
            for (const auto& bd : lib.bundles) {
                const Vec3 site = eval_surface_point(lib.neutral.positions, lib.neutral,
                                                     bd.attach);
                if (region == 0 && site.y + bp.radius > H / 2.0) continue;
                if (region == 1 && site.y - bp.radius < H / 2.0) continue;
                anchors.push_back({site.x, site.y});
            }
            while (anchors.empty()) {  // shrink until some site fits the band
                bp.radius *= 0.8;
                for (const auto& bd : lib.bundles) {
                    const Vec3 site = eval_surface_point(lib.neutral.positions, lib.neutral,
                                                         bd.attach);
                    if (region == 0 && site.y + bp.radius > H / 2.0) continue;
                    if (region == 1 && site.y - bp.radius < H / 2.0) continue;
                    anchors.push_back({site.x, site.y});
                }
            }
            const Vec2 anchor = anchors[rng.below(static_cast<int>(anchors.size()))];
            const double jitter = 0.25 * bp.radius;
            bp.center = anchor + Vec2{rng.uniform(-jitter, jitter),
                                      rng.uniform(-jitter, jitter)};
            if (region == 0) bp.center.y = std::min(bp.center.y, H / 2.0 - bp.radius);
            if (region == 1) bp.center.y = std::max(bp.center.y, H / 2.0 + bp.radius);
            const double sz = rng.below(2) ? 1.0 : -1.0;
            bp.dir = {rng.uniform(-0.55, 0.55) * cfg.amplitude,
                      rng.uniform(-0.55, 0.55) * cfg.amplitude,
                      sz * rng.uniform(0.45, 1.0) * cfg.amplitude};
            bumps.push_back(bp);
        }
        for (int v = 0; v < lib.neutral.vertex_count(); ++v) {
            const Vec2 p{lib.neutral.positions[v].x, lib.neutral.positions[v].y};
            for (const auto& bp : bumps) {
                const double f = bump((p - bp.center).norm(), bp.radius);
                if (f <= 0.0) continue;
                info.expression[v] += bp.dir * f;
                info.profile[v] = std::max(info.profile[v], f);
            }
        }

        // Jaw poses go to shapes that actually touch the hinged region.
        if (jaw_assigned < n_jaw && region != 1) {
            info.jaw.rot = jaw_assigned == 0 ? 0.4 : rng.uniform(0.1, 0.4);
            info.jaw.protrude = rng.uniform(0.0, 3.0);
            info.jaw.lateral = rng.uniform(-2.0, 2.0);
            ++jaw_assigned;
        }

        Shape shape;
        shape.name = info.name;
        shape.jaw = info.jaw;
        shape.tags = tags;
        out.info.push_back(std::move(info));
        lib.shapes.push_back(std::move(shape));
    };

    for (int k = 0; k < n_extremes; ++k) make_extreme(k);

    // In-betweens concentrate on a small parent pool so each sampled parent
    // carries a well-resolved nonlinear curve (Steiner points along it),
    // preferring jaw-free parents so the curves live at a fixed jaw pose.
    std::vector<int> parent_pool;
    for (int k = 2; k < n_extremes && parent_pool.size() < 2; ++k)
        if (lib.shapes[k].jaw.rot == 0.0 && lib.shapes[k].jaw.protrude == 0.0)
            parent_pool.push_back(k);
    for (int k = 2; k < n_extremes && parent_pool.size() < 4; ++k)
        if (std::find(parent_pool.begin(), parent_pool.end(), k) == parent_pool.end())
            parent_pool.push_back(k);
    for (int k = 0; k < n_extremes && parent_pool.empty(); ++k) parent_pool.push_back(k);

    static const double kBlendParams[3] = {0.25, 0.5, 0.75};
    for (int k = 0; k < cfg.inbetweens; ++k) {
        const int parent = parent_pool[k % parent_pool.size()];
        const double w = kBlendParams[k % 3];
        const SynthShapeInfo& pinfo = out.info[parent];

        SynthShapeInfo info;
        char name[32];
        std::snprintf(name, sizeof(name), "%s_ib%02d", pinfo.name.c_str(), k);
        info.name = name;
        info.parent = pinfo.name;
        info.blend_param = w;
        info.expression.assign(lib.neutral.vertex_count(), Vec3{});
        info.profile = pinfo.profile;
        const double bulge = cfg.nonlinearity * w * (1.0 - w);
        for (int v = 0; v < lib.neutral.vertex_count(); ++v)
            info.expression[v] =
                pinfo.expression[v] * w + Vec3{0, 0, bulge * pinfo.profile[v]};
        info.jaw.rot = w * pinfo.jaw.rot;
        info.jaw.protrude = w * pinfo.jaw.protrude;
        info.jaw.lateral = w * pinfo.jaw.lateral;

        Shape shape;
        shape.name = info.name;
        shape.jaw = info.jaw;
        shape.tags = lib.shapes[parent].tags;
        out.info.push_back(std::move(info));
        lib.shapes.push_back(std::move(shape));
    }

    // Pose each shape: the stored displacement carries the jaw motion, so the
    // loader's unskinning recovers the expression fields exactly.
    lib.bbox_diag = lib.neutral.bbox_diagonal();
    for (size_t s = 0; s < lib.shapes.size(); ++s) {
        std::vector<Vec3> rest_plus(lib.neutral.positions);
        for (int v = 0; v < lib.neutral.vertex_count(); ++v)
            rest_plus[v] += out.info[s].expression[v];
        const auto posed = skin_positions(lib, rest_plus, lib.shapes[s].jaw);
        lib.shapes[s].disp.resize(lib.neutral.vertex_count());
        for (int v = 0; v < lib.neutral.vertex_count(); ++v)
            lib.shapes[s].disp[v] = posed[v] - lib.neutral.positions[v];
    }

    lib.finalize();
    return out;
}

void write_library(const SynthResult& synth, const std::string& dir) {
    namespace fs = std::filesystem;
    const ShapeLibrary& lib = synth.lib;
    fs::create_directories(fs::path(dir) / "shapes");

    save_obj(lib.neutral, (fs::path(dir) / "neutral.obj").string());
    for (const auto& s : lib.shapes) {
        std::vector<Vec3> posed(lib.neutral.positions);
        for (int v = 0; v < lib.neutral.vertex_count(); ++v) posed[v] += s.disp[v];
        save_obj(lib.neutral, posed, (fs::path(dir) / "shapes" / (s.name + ".obj")).string());
    }

    {
        std::FILE* f = std::fopen((fs::path(dir) / "bundles.csv").string().c_str(), "w");
        if (!f) throw Error("cannot write bundles.csv");
        std::fprintf(f, "name,face,b0,b1,b2,tags\n");
        for (const auto& b : lib.bundles) {
            std::string tags;
            for (const auto& t : b.region_tags) {
                if (!tags.empty()) tags += ';';
                tags += t;
            }
            std::fprintf(f, "%s,%d,%.17g,%.17g,%.17g,%s\n", b.name.c_str(), b.attach.face,
                         b.attach.bary[0], b.attach.bary[1], b.attach.bary[2], tags.c_str());
        }
        std::fclose(f);
    }
    {
        std::FILE* f = std::fopen((fs::path(dir) / "skin_weights.txt").string().c_str(), "w");
        if (!f) throw Error("cannot write skin_weights.txt");
        for (double w : lib.skin_weights) std::fprintf(f, "%.17g\n", w);
        std::fclose(f);
    }

    nlohmann::ordered_json manifest;
    manifest["neutral"] = "neutral.obj";
    manifest["bundles"] = "bundles.csv";
    manifest["skin_weights"] = "skin_weights.txt";
    manifest["jaw_model"] = {
        {"hinge_point", {lib.jaw_model.hinge_point.x, lib.jaw_model.hinge_point.y,
                         lib.jaw_model.hinge_point.z}},
        {"hinge_axis", {lib.jaw_model.hinge_axis.x, lib.jaw_model.hinge_axis.y,
                        lib.jaw_model.hinge_axis.z}},
        {"slide_dir", {lib.jaw_model.slide_dir.x, lib.jaw_model.slide_dir.y,
                       lib.jaw_model.slide_dir.z}},
        {"lateral_dir", {lib.jaw_model.lateral_dir.x, lib.jaw_model.lateral_dir.y,
                         lib.jaw_model.lateral_dir.z}}};
    auto shapes = nlohmann::ordered_json::array();
    for (const auto& s : lib.shapes) {
        nlohmann::ordered_json js;
        js["name"] = s.name;
        js["path"] = "shapes/" + s.name + ".obj";
        js["jaw"] = {{"rot", s.jaw.rot}, {"protrude", s.jaw.protrude},
                     {"lateral", s.jaw.lateral}};
        js["tags"] = std::vector<std::string>(s.tags.begin(), s.tags.end());
        shapes.push_back(std::move(js));
    }
    manifest["shapes"] = std::move(shapes);
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw Error("cannot write manifest.json");
    out << manifest.dump(2) << "\n";
}

SynthTrack generate_track(const SynthResult& synth, int frames, uint64_t seed) {
    if (frames < 1) throw ValidationError("track needs at least one frame");
    Rng rng(seed);
    const ShapeLibrary& lib = synth.lib;
    const int ns = static_cast<int>(lib.shapes.size());
    const int key_step = 12;

    // Sparse convex keyframe weights, linearly interpolated.
    auto random_weights = [&]() {
        std::vector<double> w(ns, 0.0);
        const int support = std::min(3, ns);
        double sum = 0.0;
        for (int i = 0; i < support; ++i) {
            const int s = rng.below(ns);
            const double x = rng.uniform(0.1, 1.0);
            w[s] += x;
            sum += x;
        }
        for (double& x : w) x /= sum;
        return w;
    };

    std::vector<std::vector<double>> keys;
    for (int f = 0; f <= (frames - 1) / key_step + 1; ++f) keys.push_back(random_weights());

    SynthTrack track;
    track.dense.resize(frames);
    for (int f = 0; f < frames; ++f) {
        const int k = f / key_step;
        const double t = static_cast<double>(f - k * key_step) / key_step;
        std::vector<double> w(ns);
        for (int s = 0; s < ns; ++s) w[s] = (1.0 - t) * keys[k][s] + t * keys[k + 1][s];

        JawPose pose;
        std::vector<Vec3> rest_plus(lib.neutral.positions);
        for (int s = 0; s < ns; ++s) {
            if (w[s] == 0.0) continue;
            pose.rot += w[s] * lib.shapes[s].jaw.rot;
            pose.protrude += w[s] * lib.shapes[s].jaw.protrude;
            pose.lateral += w[s] * lib.shapes[s].jaw.lateral;
            for (int v = 0; v < lib.neutral.vertex_count(); ++v)
                rest_plus[v] += synth.info[s].expression[v] * w[s];
        }
        track.dense[f] = skin_positions(lib, rest_plus, pose);
        track.jaw[f] = pose;
        for (const auto& b : lib.bundles)
            track.bundles[f][b.name] =
                eval_surface_point(track.dense[f], lib.neutral, b.attach);
    }
    return track;
}

void write_track(const SynthResult& synth, const SynthTrack& track, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_track(track.bundles, (fs::path(dir) / "track.csv").string());
    save_jaw_track(track.jaw, (fs::path(dir) / "jaw.csv").string());
    for (size_t f = 0; f < track.dense.size(); ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "truth_%04zu.obj", f);
        save_obj(synth.lib.neutral, track.dense[f], (fs::path(dir) / name).string());
    }
}

HeldOutExpression make_heldout(const SynthResult& synth, const std::string& parent, double w) {
    const ShapeLibrary& lib = synth.lib;
    const SynthShapeInfo* pinfo = nullptr;
    for (const auto& i : synth.info)
        if (i.name == parent) pinfo = &i;
    if (!pinfo) throw Error("make_heldout: unknown parent shape '" + parent + "'");

    HeldOutExpression out;
    out.expression.assign(lib.neutral.vertex_count(), Vec3{});
    // The library's own in-between construction, but with a blend parameter
    // that varies across the sheet: every local patch lies on the stored
    // nonlinear curve, while no single global weight vector reproduces the
    // whole expression.
    double bulge_scale = 0.0;
    for (const auto& i : synth.info)
        if (i.parent == parent && i.blend_param > 0.0) {
            for (int v = 0; v < lib.neutral.vertex_count(); ++v) {
                const double denom = i.blend_param * (1.0 - i.blend_param) * i.profile[v];
                if (denom > 1e-9) {
                    const double z =
                        i.expression[v].z - i.blend_param * pinfo->expression[v].z;
                    bulge_scale = std::max(bulge_scale, z / denom);
                }
            }
            break;
        }
    if (bulge_scale == 0.0) bulge_scale = 6.0;

    const Box3 box = lib.neutral.bounds();
    const double width = std::max(box.hi.x - box.lo.x, 1e-9);
    const double height = std::max(box.hi.y - box.lo.y, 1e-9);
    for (int v = 0; v < lib.neutral.vertex_count(); ++v) {
        // Undulating blend parameter at roughly twice the marker spacing:
        // neighboring patches hit visibly different points of the curve, so
        // a reconstruction has to carry each marker's own mixture.
        const double x = (lib.neutral.positions[v].x - box.lo.x) / width;
        const double y = (lib.neutral.positions[v].y - box.lo.y) / height;
        const double local_w =
            w + 0.15 * std::sin(2.0 * M_PI * 3.5 * x) * std::cos(2.0 * M_PI * 2.5 * y);
        const double bulge = bulge_scale * local_w * (1.0 - local_w);
        out.expression[v] = pinfo->expression[v] * local_w +
                            Vec3{0.0, 0.0, bulge * pinfo->profile[v]};
    }
    out.jaw.rot = w * pinfo->jaw.rot;
    out.jaw.protrude = w * pinfo->jaw.protrude;
    out.jaw.lateral = w * pinfo->jaw.lateral;

    std::vector<Vec3> rest_plus(lib.neutral.positions);
    for (int v = 0; v < lib.neutral.vertex_count(); ++v) rest_plus[v] += out.expression[v];
    out.dense = skin_positions(lib, rest_plus, out.jaw);
    for (const auto& b : lib.bundles)
        out.observed[b.name] = eval_surface_point(out.dense, lib.neutral, b.attach);
    return out;
}

}  // namespace lgi
