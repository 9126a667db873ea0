// Command-line front end: synthetic dataset generation, index building,
// reconstruction, verification round trips and sequence comparison.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lgi/error.hpp"
#include "lgi/obj_io.hpp"
#include "lgi/pipeline.hpp"
#include "lgi/synth.hpp"

namespace fs = std::filesystem;
using namespace lgi;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitThreshold = 3;

std::vector<std::string> sorted_objs(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".obj")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<std::vector<Vec3>> load_sequence(const std::string& dir, const TriMesh& expect) {
    std::vector<std::vector<Vec3>> frames;
    for (const auto& path : sorted_objs(dir)) {
        TriMesh m = load_obj(path);
        if (m.vertex_count() != expect.vertex_count())
            throw ValidationError(path + ": vertex count does not match the library neutral");
        frames.push_back(std::move(m.positions));
    }
    return frames;
}

struct IndexBuildOptions {
    int resolution = 512;
    double min_disp = 1e-3;
    double dedupe = 1e-4;
    bool no_tag_prune = false;
    double min_vol = 1e-6;
    double max_aspect = 25.0;
    double max_extent = 0.75;
    uint64_t cap = 250000;
    std::vector<double> jaw_bins;
};

int cmd_synth(const SynthConfig& cfg, const std::string& out_dir, int frames) {
    const auto synth = generate_library(cfg);
    write_library(synth, out_dir);
    const auto track = generate_track(synth, frames, cfg.seed + 1);
    write_track(synth, track, (fs::path(out_dir) / "truth").string());
    std::printf("library: %d vertices, %zu shapes, %zu bundles -> %s\n",
                synth.lib.neutral.vertex_count(), synth.lib.shapes.size(),
                synth.lib.bundles.size(), out_dir.c_str());
    std::printf("track:   %d frames -> %s/truth\n", frames, out_dir.c_str());
    return 0;
}

int cmd_build_index(const std::string& manifest, const std::string& out,
                    const std::string& nn_out, const IndexBuildOptions& opt,
                    const std::string& dump_pgm, int threads) {
    const auto lib = load_library(manifest);
    const auto products = build_blend_products(lib, opt.resolution, threads);

    PruneConfig prune;
    prune.min_disp_frac = opt.min_disp;
    prune.dedupe_frac = opt.dedupe;
    prune.tag_prune = !opt.no_tag_prune;
    QualityConfig quality;
    quality.min_vol_frac = opt.min_vol;
    quality.max_aspect = opt.max_aspect;
    quality.max_extent_frac = opt.max_extent;
    quality.combinatorial_cap = opt.cap;

    const auto set = build_index_set(lib, products, prune, quality, opt.jaw_bins, threads);
    save_index(set, out);
    if (!nn_out.empty()) save_nn_field(products.nn, nn_out);

    std::printf("%-12s %-14s %8s %8s %12s %6s\n", "bundle", "jaw_bin", "points", "tets",
                "grid", "mode");
    for (const auto& e : set.entries) {
        char bin[32] = "-";
        if (e.cloud.jaw_bin)
            std::snprintf(bin, sizeof(bin), "[%.2f,%.2f)", e.cloud.jaw_bin->first,
                          e.cloud.jaw_bin->second);
        char grid[32];
        std::snprintf(grid, sizeof(grid), "%ux%ux%u", e.grid.dims[0], e.grid.dims[1],
                      e.grid.dims[2]);
        std::printf("%-12s %-14s %8zu %8zu %12s %6s\n", e.cloud.bundle.c_str(), bin,
                    e.cloud.points.size(), e.tets.tets.size(),
                    e.tets.tets.empty() ? "-" : grid,
                    e.tets.projection_only ? "proj" : "tets");
    }
    std::printf("index -> %s\n", out.c_str());
    if (!nn_out.empty()) std::printf("weight field -> %s\n", nn_out.c_str());

    if (!dump_pgm.empty()) {
        fs::create_directories(dump_pgm);
        save_voronoi_pgm(products.grid, products.partition,
                         static_cast<int>(lib.bundles.size()),
                         (fs::path(dump_pgm) / "voronoi.pgm").string());
        for (size_t b = 0; b < products.bundle_names.size(); ++b)
            save_weight_pgm(products.grid, lib.neutral, products.nn, static_cast<uint32_t>(b),
                            (fs::path(dump_pgm) / ("weight_" + products.bundle_names[b] + ".pgm"))
                                .string());
        std::printf("debug images -> %s\n", dump_pgm.c_str());
    }
    return 0;
}

int cmd_reconstruct(const std::string& manifest, const std::string& index_path,
                    const std::string& track_path, const std::string& jaw_path,
                    const std::string& out_dir, const std::string& blend_mode, int window,
                    double rbf_sigma, const std::string& truth_dir, int resolution,
                    const std::string& nn_path, const std::string& solutions_path,
                    bool update_usage, double tol_frac, int threads) {
    const auto lib = load_library(manifest);
    auto indices = load_index(index_path);
    const auto track = load_track(track_path);
    std::map<int, JawPose> jaw;
    if (!jaw_path.empty()) jaw = load_jaw_track(jaw_path);

    const bool need_products = blend_mode == "rbf" || nn_path.empty();
    BlendProducts products;
    NNWeightField nn;
    if (need_products) {
        products = build_blend_products(lib, resolution, threads, nn_path.empty());
        nn = nn_path.empty() ? products.nn : load_nn_field(nn_path);
    } else {
        nn = load_nn_field(nn_path);
    }
    NNWeightField field = nn;
    if (blend_mode == "rbf") {
        double sigma = rbf_sigma;
        if (sigma <= 0.0) {
            // Default: three quarters of the mean nearest-site spacing.
            double acc = 0.0;
            int count = 0;
            for (size_t a = 0; a < products.fields.size(); ++a) {
                double nearest = std::numeric_limits<double>::max();
                const BundleDef& def = lib.bundles[a];
                const int texel = products.grid.texel_of_uv(
                    eval_surface_point_uv(lib.neutral, def.attach));
                for (size_t b = 0; b < products.fields.size(); ++b)
                    if (b != a && texel >= 0)
                        nearest = std::min(nearest, products.fields[b][texel]);
                if (std::isfinite(nearest)) {
                    acc += nearest;
                    ++count;
                }
            }
            sigma = count ? 0.75 * acc / count : 0.1 * lib.bbox_diag;
        }
        field = rbf_blend_field(products.grid, products.fields, products.bundle_names,
                                lib.neutral, sigma);
        std::printf("rbf sigma: %.4g\n", sigma);
    }

    fs::create_directories(out_dir);
    std::vector<FrameSolution> solutions;
    const FrameSolution* prev = nullptr;
    for (const auto& [frame, observed] : track) {
        const JawPose pose = jaw.count(frame) ? jaw.at(frame) : JawPose{};
        solutions.push_back(solve_frame(indices, lib, observed, pose, prev, {}, frame));
        prev = &solutions.back();
    }
    if (window > 1) solutions = smooth_track(lib, solutions, window);

    const double tol_len = tol_frac * lib.bbox_diag +
                           (need_products ? products.grid.max_step : 0.0);
    int projected = 0, violations = 0;
    double residual_sum = 0.0, residual_max = 0.0;
    size_t residual_count = 0;
    std::vector<std::vector<Vec3>> reconstructed;
    for (const auto& fs_sol : solutions) {
        std::vector<Vec3> positions;
        if (blend_mode == "baseline") {
            const auto it = track.find(fs_sol.frame);
            positions = baseline_displacement_interp(lib, field, it->second, fs_sol.jaw);
        } else {
            positions = blend_frame(lib, field, frame_weights(fs_sol), fs_sol.jaw, threads);
        }
        // Surface-level residual check: the blended surface must pass through
        // every non-projected bundle.
        const auto it = track.find(fs_sol.frame);
        for (const auto& [name, sol] : fs_sol.per_bundle) {
            if (!it->second.count(name)) continue;
            residual_sum += sol.residual;
            residual_max = std::max(residual_max, sol.residual);
            ++residual_count;
            if (sol.projected) {
                ++projected;
                continue;
            }
            if (blend_mode == "nn") {
                const Vec3 on_surface = eval_surface_point(
                    positions, lib.neutral, lib.find_bundle(name)->attach);
                if ((on_surface - it->second.at(name)).norm() > tol_len) ++violations;
            }
        }
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.obj", fs_sol.frame);
        save_obj(lib.neutral, positions, (fs::path(out_dir) / name).string());
        reconstructed.push_back(std::move(positions));
    }

    if (!solutions_path.empty()) save_solutions_json(solutions, solutions_path);
    if (update_usage) save_index(indices, index_path);

    std::printf("frames: %zu  solver residual mean %.3g max %.3g  projected %d\n",
                solutions.size(), residual_count ? residual_sum / residual_count : 0.0,
                residual_max, projected);

    if (!truth_dir.empty()) {
        const auto truth = load_sequence(truth_dir, lib.neutral);
        if (truth.size() != reconstructed.size())
            throw ValidationError("truth sequence frame count does not match the track");
        const auto report = compare_sequences(reconstructed, truth, blend_mode);
        save_report_json(report, (fs::path(out_dir) / "report.json").string());
        save_per_vertex_csv(report, (fs::path(out_dir) / "per_vertex_error.csv").string());
        std::printf("vs truth: worst rms %.6g  worst max %.6g -> %s/report.json\n",
                    report.worst_rms(), report.worst_max(), out_dir.c_str());
    }

    if (blend_mode == "nn" && violations > 0) {
        std::printf("FAIL: %d non-projected bundles off the blended surface (tol %.3g)\n",
                    violations, tol_len);
        return kExitThreshold;
    }
    return 0;
}

int cmd_roundtrip(const std::string& manifest, const std::string& index_path, int resolution,
                  double tol_frac, int threads) {
    const auto lib = load_library(manifest);
    auto indices = load_index(index_path);
    const auto products = build_blend_products(lib, resolution, threads);
    const auto rows = roundtrip(lib, indices, products, {}, threads);
    const double tol = tol_frac * lib.bbox_diag;
    bool failed = false;
    std::printf("%-20s %14s %14s %s\n", "shape", "rms", "max", "status");
    for (const auto& row : rows) {
        const bool bad = row.rms > tol;
        failed |= bad;
        std::printf("%-20s %14.6g %14.6g %s%s\n", row.shape.c_str(), row.rms, row.max_err,
                    bad ? "FAIL" : "ok", row.unreachable ? " (unreachable)" : "");
    }
    std::printf("tolerance: %.6g (%g x bbox diagonal)\n", tol, tol_frac);
    return failed ? kExitThreshold : 0;
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b, const std::string& out,
                const std::string& per_vertex, const std::string& label) {
    const auto files_a = sorted_objs(dir_a);
    const auto files_b = sorted_objs(dir_b);
    if (files_a.size() != files_b.size())
        throw ValidationError("sequences have different frame counts");
    if (files_a.empty()) throw ValidationError("no OBJ frames found in " + dir_a);
    std::vector<std::vector<Vec3>> a, b;
    for (const auto& f : files_a) a.push_back(load_obj(f).positions);
    for (const auto& f : files_b) b.push_back(load_obj(f).positions);
    const auto report = compare_sequences(a, b, label);
    save_report_json(report, out);
    if (!per_vertex.empty()) save_per_vertex_csv(report, per_vertex);
    std::printf("%zu frames: worst rms %.6g  worst max %.6g -> %s\n", a.size(),
                report.worst_rms(), report.worst_max(), out.c_str());
    return 0;
}

int cmd_prune_index(const std::string& in, const std::string& out, uint64_t min_uses,
                    const std::string& blacklist_path) {
    auto set = load_index(in);

    std::map<std::string, std::vector<Tetra>> blacklist;
    if (!blacklist_path.empty()) {
        std::ifstream file(blacklist_path);
        if (!file) throw ValidationError("cannot open blacklist: " + blacklist_path);
        std::string line;
        int line_no = 0;
        while (std::getline(file, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ss(line);
            std::string bundle;
            uint32_t a, b, c, d;
            if (!(ss >> bundle >> a >> b >> c >> d))
                throw ParseError(blacklist_path, line_no, "expected bundle,id0,id1,id2,id3");
            blacklist[bundle].push_back(Tetra::canonical(a, b, c, d));
        }
    }

    size_t dropped = 0;
    for (auto& e : set.entries) {
        const auto& extra = blacklist.count(e.cloud.bundle) ? blacklist[e.cloud.bundle]
                                                            : std::vector<Tetra>{};
        TetSet kept;
        std::vector<uint64_t> usage;
        for (size_t t = 0; t < e.tets.tets.size(); ++t) {
            const bool listed =
                std::find(extra.begin(), extra.end(), e.tets.tets[t]) != extra.end() ||
                std::find(e.blacklist.begin(), e.blacklist.end(), e.tets.tets[t]) !=
                    e.blacklist.end();
            const bool unused = min_uses > 0 && e.usage[t] < min_uses;
            if (listed || unused) {
                ++dropped;
                if (listed && std::find(e.blacklist.begin(), e.blacklist.end(),
                                        e.tets.tets[t]) == e.blacklist.end())
                    e.blacklist.push_back(e.tets.tets[t]);
                continue;
            }
            kept.tets.push_back(e.tets.tets[t]);
            kept.quality.push_back(e.tets.quality[t]);
            usage.push_back(e.usage[t]);
        }
        kept.projection_only = kept.tets.empty();
        e.tets = std::move(kept);
        e.usage = std::move(usage);
        if (!e.tets.tets.empty())
            e.grid = build_grid(e.tets, e.cloud);
        else
            e.grid = UniformGrid{};
    }
    save_index(set, out);
    std::printf("dropped %zu tets -> %s\n", dropped, out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-marker facial reconstruction via local geometric indexing"};
    app.require_subcommand(1);

    int threads = 1;
    app.add_option("--threads", threads, "worker threads")->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic library and track");
    SynthConfig synth_cfg;
    std::string synth_out;
    int synth_frames = 60;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--nx", synth_cfg.nx)->capture_default_str();
    synth->add_option("--ny", synth_cfg.ny)->capture_default_str();
    synth->add_option("--width", synth_cfg.width)->capture_default_str();
    synth->add_option("--height", synth_cfg.height)->capture_default_str();
    synth->add_option("--shapes", synth_cfg.shapes)->capture_default_str();
    synth->add_option("--inbetweens", synth_cfg.inbetweens)->capture_default_str();
    synth->add_option("--bundles", synth_cfg.bundles)->capture_default_str();
    synth->add_option("--amplitude", synth_cfg.amplitude)->capture_default_str();
    synth->add_option("--nonlinearity", synth_cfg.nonlinearity)->capture_default_str();
    synth->add_option("--jaw-fraction", synth_cfg.jaw_fraction)->capture_default_str();
    synth->add_option("--frames", synth_frames)->capture_default_str();
    synth->add_option("--seed", synth_cfg.seed)->capture_default_str();

    // build-index
    auto* build = app.add_subcommand("build-index", "build the per-bundle tet index");
    std::string bi_manifest, bi_out, bi_nn_out, bi_dump;
    IndexBuildOptions bi_opt;
    build->add_option("--library", bi_manifest, "library manifest")->required();
    build->add_option("--out", bi_out, "index cache path")->required();
    build->add_option("--nn-out", bi_nn_out, "also write the weight-field cache");
    build->add_option("--resolution", bi_opt.resolution)->capture_default_str();
    build->add_option("--min-disp", bi_opt.min_disp, "prune threshold, x bbox diagonal")
        ->capture_default_str();
    build->add_option("--dedupe", bi_opt.dedupe, "dedupe radius, x bbox diagonal")
        ->capture_default_str();
    build->add_flag("--no-tag-prune", bi_opt.no_tag_prune, "ignore region tags");
    build->add_option("--min-vol", bi_opt.min_vol)->capture_default_str();
    build->add_option("--max-aspect", bi_opt.max_aspect)->capture_default_str();
    build->add_option("--max-extent", bi_opt.max_extent)->capture_default_str();
    build->add_option("--cap", bi_opt.cap)->capture_default_str();
    build->add_option("--jaw-bins", bi_opt.jaw_bins, "jaw rotation bin edges (rad)");
    build->add_option("--dump-pgm", bi_dump, "write Voronoi/weight debug images");

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "reconstruct a track into an OBJ sequence");
    std::string rc_manifest, rc_index, rc_track, rc_jaw, rc_out, rc_truth, rc_nn, rc_solutions;
    std::string rc_blend = "nn";
    int rc_window = 1, rc_resolution = 512;
    double rc_sigma = 0.0, rc_tol = 1e-6;
    bool rc_update_usage = false;
    rec->add_option("--library", rc_manifest)->required();
    rec->add_option("--index", rc_index)->required();
    rec->add_option("--track", rc_track)->required();
    rec->add_option("--jaw", rc_jaw, "jaw track csv (default: zero pose)");
    rec->add_option("--out", rc_out)->required();
    rec->add_option("--blend", rc_blend, "nn|rbf|baseline")
        ->check(CLI::IsMember({"nn", "rbf", "baseline"}))
        ->capture_default_str();
    rec->add_option("--window", rc_window, "temporal smoothing window (odd)")
        ->capture_default_str();
    rec->add_option("--rbf-sigma", rc_sigma, "gaussian width (0 = auto)");
    rec->add_option("--truth", rc_truth, "ground-truth OBJ directory");
    rec->add_option("--resolution", rc_resolution)->capture_default_str();
    rec->add_option("--nn", rc_nn, "precomputed weight-field cache");
    rec->add_option("--solutions", rc_solutions, "write per-frame solution JSON");
    rec->add_flag("--update-usage", rc_update_usage, "write usage counters back to the index");
    rec->add_option("--tol", rc_tol, "interpolation tolerance, x bbox diagonal")
        ->capture_default_str();

    // roundtrip
    auto* rt = app.add_subcommand("roundtrip", "verify every library shape reconstructs");
    std::string rt_manifest, rt_index;
    int rt_resolution = 512;
    double rt_tol = 1e-6;
    rt->add_option("--library", rt_manifest)->required();
    rt->add_option("--index", rt_index)->required();
    rt->add_option("--resolution", rt_resolution)->capture_default_str();
    rt->add_option("--tol", rt_tol, "per-shape rms tolerance, x bbox diagonal")
        ->capture_default_str();

    // compare
    auto* cmp = app.add_subcommand("compare", "compare two OBJ sequences");
    std::string cp_a, cp_b, cp_out = "report.json", cp_pv, cp_label = "compare";
    cmp->add_option("--a", cp_a)->required();
    cmp->add_option("--b", cp_b)->required();
    cmp->add_option("--out", cp_out)->capture_default_str();
    cmp->add_option("--per-vertex", cp_pv, "per-vertex error csv");
    cmp->add_option("--label", cp_label)->capture_default_str();

    // prune-index
    auto* prune = app.add_subcommand("prune-index", "cull unused or blacklisted tets");
    std::string pr_in, pr_out, pr_blacklist;
    uint64_t pr_min_uses = 0;
    prune->add_option("--index", pr_in)->required();
    prune->add_option("--out", pr_out)->required();
    prune->add_option("--min-uses", pr_min_uses, "drop tets selected fewer times")
        ->capture_default_str();
    prune->add_option("--blacklist", pr_blacklist, "csv of bundle,id0,id1,id2,id3");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(synth_cfg, synth_out, synth_frames);
        if (*build)
            return cmd_build_index(bi_manifest, bi_out, bi_nn_out, bi_opt, bi_dump, threads);
        if (*rec)
            return cmd_reconstruct(rc_manifest, rc_index, rc_track, rc_jaw, rc_out, rc_blend,
                                   rc_window, rc_sigma, rc_truth, rc_resolution, rc_nn,
                                   rc_solutions, rc_update_usage, rc_tol, threads);
        if (*rt) return cmd_roundtrip(rt_manifest, rt_index, rt_resolution, rt_tol, threads);
        if (*cmp) return cmd_compare(cp_a, cp_b, cp_out, cp_pv, cp_label);
        if (*prune) return cmd_prune_index(pr_in, pr_out, pr_min_uses, pr_blacklist);
    } catch (const CapExceeded& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return 0;
}
