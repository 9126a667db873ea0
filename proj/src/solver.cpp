#include "lgi/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lgi/error.hpp"

namespace lgi {

double neighbor_score(const BundleCloud& cloud, const std::vector<uint32_t>& simplex,
                      const std::vector<double>& weights,
                      const std::map<std::string, Vec3>& observed_neighbors,
                      SolveConfig::NeighborAgg agg) {
    if (observed_neighbors.empty() || simplex.empty()) return 0.0;
    double acc = 0.0;
    int count = 0;
    for (const auto& [nb, obs] : observed_neighbors) {
        Vec3 predicted;
        bool have = true;
        for (size_t i = 0; i < simplex.size(); ++i) {
            const auto& evals = cloud.points[simplex[i]].neighbor_evals;
            const auto it = evals.find(nb);
            if (it == evals.end()) {
                have = false;
                break;
            }
            predicted += it->second * weights[i];
        }
        if (!have) continue;
        const double d = (predicted - obs).norm();
        switch (agg) {
            case SolveConfig::NeighborAgg::rms: acc += d * d; break;
            case SolveConfig::NeighborAgg::sum: acc += d; break;
            case SolveConfig::NeighborAgg::max: acc = std::max(acc, d); break;
        }
        ++count;
    }
    if (count == 0) return 0.0;
    if (agg == SolveConfig::NeighborAgg::rms) return std::sqrt(acc / count);
    return acc;
}

int temporal_priority(const std::vector<uint32_t>& simplex, const BundleSolution* prev) {
    if (!prev) return 0;
    int shared = 0;
    for (uint32_t id : simplex)
        if (std::find(prev->simplex.begin(), prev->simplex.end(), id) != prev->simplex.end())
            ++shared;
    return shared;
}

namespace {

void fill_shape_weights(const BundleCloud& cloud, BundleSolution& sol) {
    sol.shape_weights.clear();
    for (size_t i = 0; i < sol.simplex.size(); ++i) {
        const double w = sol.weights_on_points[i];
        if (w <= 0.0) continue;
        sol.shape_weights[cloud.points[sol.simplex[i]].shape] += w;
    }
    if (sol.shape_weights.empty()) sol.shape_weights[kNeutralName] = 1.0;
}

struct RankedCandidate {
    int temporal = 0;
    double score = 0.0;
    std::vector<uint32_t> simplex;
    std::vector<double> weights;
    Vec3 point;
    double distance = 0.0;
    int tet = -1;

    bool better_than(const RankedCandidate& o) const {
        if (temporal != o.temporal) return temporal > o.temporal;
        if (score != o.score) return score < o.score;
        return simplex < o.simplex;
    }
};

}  // namespace

BundleSolution select_candidate(BundleIndex& index, const Vec3& p,
                                const std::map<std::string, Vec3>& observed_neighbors,
                                const BundleSolution* prev, const SolveConfig& cfg) {
    BundleSolution sol;
    sol.bundle = index.cloud.bundle;
    sol.observed_unskinned = p;
    const double diag = std::max(index.cloud.diagonal(), 1e-300);
    const double tol_len = cfg.projection_tie_frac * diag;

    // Coincident cloud points win outright: this keeps dataset round trips
    // exact and sidesteps the many tets incident to the vertex. Several
    // points may share the position with different local patches; the
    // neighbor criterion picks between them.
    std::vector<int> coincident;
    for (size_t i = 0; i < index.cloud.points.size(); ++i)
        if ((index.cloud.points[i].pos - p).norm() < index.dedupe_eps)
            coincident.push_back(static_cast<int>(i));
    if (!coincident.empty()) {
        int best = -1;
        int best_temporal = -1;
        double best_score = 0.0;
        for (int i : coincident) {
            const std::vector<uint32_t> simplex{static_cast<uint32_t>(i)};
            const int temporal = cfg.temporal_priority ? temporal_priority(simplex, prev) : 0;
            const double score =
                neighbor_score(index.cloud, simplex, {1.0}, observed_neighbors, cfg.aggregation);
            if (best < 0 || temporal > best_temporal ||
                (temporal == best_temporal && score < best_score)) {
                best = i;
                best_temporal = temporal;
                best_score = score;
            }
        }
        sol.simplex = {static_cast<uint32_t>(best)};
        sol.weights_on_points = {1.0};
        sol.residual = (index.cloud.points[best].pos - p).norm();
        sol.projected = sol.residual > tol_len;
        fill_shape_weights(index.cloud, sol);
        return sol;
    }

    const auto prev_for_bin = prev;  // caller already filtered by bin

    auto hits = query_containing(index, p, cfg.containment_tol);
    const RankedCandidate* best = nullptr;
    std::vector<RankedCandidate> ranked;
    if (!hits.empty()) {
        ranked.reserve(hits.size());
        for (const auto& h : hits) {
            RankedCandidate c;
            const auto& ids = index.tets.tets[h.tet].ids;
            c.simplex.assign(ids.begin(), ids.end());
            c.weights.assign(h.weights.begin(), h.weights.end());
            c.tet = static_cast<int>(h.tet);
            c.temporal = cfg.temporal_priority ? temporal_priority(c.simplex, prev_for_bin) : 0;
            c.score = neighbor_score(index.cloud, c.simplex, c.weights, observed_neighbors,
                                     cfg.aggregation);
            Vec3 recon;
            for (size_t i = 0; i < c.simplex.size(); ++i)
                recon += index.cloud.points[c.simplex[i]].pos * c.weights[i];
            c.point = recon;
            c.distance = (recon - p).norm();
            ranked.push_back(std::move(c));
        }
    } else {
        for (auto& h : project_all(index, p, tol_len)) {
            RankedCandidate c;
            c.simplex = std::move(h.simplex);
            c.weights = std::move(h.weights);
            c.point = h.point;
            c.distance = h.distance;
            c.tet = h.tet;
            c.temporal = cfg.temporal_priority ? temporal_priority(c.simplex, prev_for_bin) : 0;
            c.score = neighbor_score(index.cloud, c.simplex, c.weights, observed_neighbors,
                                     cfg.aggregation);
            ranked.push_back(std::move(c));
        }
    }
    for (const auto& c : ranked)
        if (!best || c.better_than(*best)) best = &c;
    if (!best) throw Error("select_candidate: empty index for bundle '" + sol.bundle + "'");

    sol.simplex = best->simplex;
    sol.weights_on_points = best->weights;
    sol.residual = best->distance;
    sol.projected = best->distance > tol_len;
    fill_shape_weights(index.cloud, sol);
    if (best->tet >= 0 && static_cast<size_t>(best->tet) < index.usage.size())
        ++index.usage[best->tet];
    return sol;
}

FrameSolution solve_frame(IndexSet& indices, const ShapeLibrary& lib,
                          const std::map<std::string, Vec3>& observed, const JawPose& pose,
                          const FrameSolution* prev, const SolveConfig& cfg, int frame) {
    FrameSolution out;
    out.frame = frame;
    out.jaw = pose;

    // Unskin all observations first; they double as the neighbor targets.
    std::map<std::string, Vec3> unskinned;
    for (const auto& [name, pos] : observed) {
        const BundleDef* def = lib.find_bundle(name);
        if (!def) throw Error("solve_frame: unknown bundle '" + name + "'");
        unskinned[name] = blended_surface_transform(lib, def->attach, pose).inverse().apply(pos);
    }

    for (const auto& bundle : lib.bundles) {
        BundleIndex* entry = indices.mutable_for_bundle_at(bundle.name, pose.rot);
        if (!entry) throw Error("solve_frame: no index entry for bundle '" + bundle.name + "'");

        int bin = 0;
        {
            int ordinal = 0;
            for (const auto& e : indices.entries) {
                if (e.cloud.bundle != bundle.name) continue;
                if (&e == entry) bin = ordinal;
                ++ordinal;
            }
        }

        const auto obs = unskinned.find(bundle.name);
        if (obs == unskinned.end()) {
            BundleSolution sol;
            sol.bundle = bundle.name;
            sol.simplex = {0};  // the neutral point
            sol.weights_on_points = {1.0};
            sol.shape_weights[kNeutralName] = 1.0;
            sol.observed_unskinned = entry->cloud.points[0].pos;
            sol.bin = bin;
            out.per_bundle[bundle.name] = std::move(sol);
            continue;
        }

        const BundleSolution* prev_sol = nullptr;
        if (prev) {
            const auto it = prev->per_bundle.find(bundle.name);
            if (it != prev->per_bundle.end() && it->second.bin == bin) prev_sol = &it->second;
        }

        std::map<std::string, Vec3> neighbor_obs;
        for (const auto& [nb, p] : unskinned)
            if (nb != bundle.name) neighbor_obs.emplace(nb, p);

        BundleSolution sol = select_candidate(*entry, obs->second, neighbor_obs, prev_sol, cfg);
        sol.bin = bin;
        out.per_bundle[bundle.name] = std::move(sol);
    }
    return out;
}

std::vector<FrameSolution> smooth_track(const ShapeLibrary& lib,
                                        const std::vector<FrameSolution>& solutions, int window) {
    if (window < 1 || window % 2 == 0)
        throw Error("smoothing window must be odd and >= 1");
    if (window == 1 || solutions.size() < 2) return solutions;

    const int n = static_cast<int>(solutions.size());
    const int half = window / 2;
    const double tol_len = 1e-9 * lib.bbox_diag;
    std::vector<FrameSolution> out = solutions;

    for (auto& [name, first_sol] : out.front().per_bundle) {
        (void)first_sol;
        for (int f = 0; f < n; ++f) {
            const int lo = std::max(0, f - half), hi = std::min(n - 1, f + half);
            std::map<std::string, double> avg;
            for (int g = lo; g <= hi; ++g) {
                const auto it = solutions[g].per_bundle.find(name);
                if (it == solutions[g].per_bundle.end())
                    throw Error("smooth_track: bundle '" + name + "' missing from frame " +
                                std::to_string(solutions[g].frame));
                for (const auto& [shape, w] : it->second.shape_weights) avg[shape] += w;
            }
            double sum = 0.0;
            for (const auto& [shape, w] : avg) sum += w;
            for (auto& [shape, w] : avg) w /= sum;

            BundleSolution& sol = out[f].per_bundle[name];
            sol.shape_weights = std::move(avg);
            const BundleDef* def = lib.find_bundle(name);
            const Vec3 recon = eval_bundle(lib, *def, sol.shape_weights, JawPose{});
            sol.residual = (recon - sol.observed_unskinned).norm();
            sol.projected = sol.residual > tol_len;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Track I/O

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::map<int, std::map<std::string, Vec3>> load_track(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open track file: " + path);
    std::map<int, std::map<std::string, Vec3>> track;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (line_no == 1 && line.rfind("frame", 0) == 0) continue;
        const auto cols = split_csv(line);
        if (cols.size() != 5) throw ParseError(path, line_no, "expected frame,bundle,x,y,z");
        try {
            track[std::stoi(cols[0])][cols[1]] =
                Vec3{std::stod(cols[2]), std::stod(cols[3]), std::stod(cols[4])};
        } catch (const std::exception&) {
            throw ParseError(path, line_no, "malformed numeric field");
        }
    }
    return track;
}

void save_track(const std::map<int, std::map<std::string, Vec3>>& track,
                const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot open file for writing: " + path);
    std::fprintf(f, "frame,bundle,x,y,z\n");
    for (const auto& [frame, bundles] : track)
        for (const auto& [name, p] : bundles)
            std::fprintf(f, "%d,%s,%.17g,%.17g,%.17g\n", frame, name.c_str(), p.x, p.y, p.z);
    std::fclose(f);
}

std::map<int, JawPose> load_jaw_track(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open jaw track file: " + path);
    std::map<int, JawPose> track;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (line_no == 1 && line.rfind("frame", 0) == 0) continue;
        const auto cols = split_csv(line);
        if (cols.size() != 4)
            throw ParseError(path, line_no, "expected frame,rot,protrude,lateral");
        try {
            JawPose pose{std::stod(cols[1]), std::stod(cols[2]), std::stod(cols[3])};
            track[std::stoi(cols[0])] = pose;
        } catch (const std::exception&) {
            throw ParseError(path, line_no, "malformed numeric field");
        }
    }
    return track;
}

void save_jaw_track(const std::map<int, JawPose>& track, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot open file for writing: " + path);
    std::fprintf(f, "frame,rot,protrude,lateral\n");
    for (const auto& [frame, pose] : track)
        std::fprintf(f, "%d,%.17g,%.17g,%.17g\n", frame, pose.rot, pose.protrude, pose.lateral);
    std::fclose(f);
}

void save_solutions_json(const std::vector<FrameSolution>& solutions, const std::string& path) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& fs : solutions) {
        nlohmann::json jf;
        jf["frame"] = fs.frame;
        jf["jaw"] = {{"rot", fs.jaw.rot}, {"protrude", fs.jaw.protrude},
                     {"lateral", fs.jaw.lateral}};
        nlohmann::json bundles;
        for (const auto& [name, sol] : fs.per_bundle) {
            nlohmann::json jb;
            jb["simplex"] = sol.simplex;
            jb["weights"] = sol.weights_on_points;
            jb["shape_weights"] = sol.shape_weights;
            jb["residual"] = sol.residual;
            jb["projected"] = sol.projected;
            bundles[name] = std::move(jb);
        }
        jf["bundles"] = std::move(bundles);
        frames.push_back(std::move(jf));
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot open file for writing: " + path);
    out << frames.dump(2) << "\n";
}

}  // namespace lgi
