#include "lgi/pipeline.hpp"

#include <mutex>
#include <set>
#include <thread>

#include "lgi/error.hpp"

namespace lgi {

std::vector<std::string> BlendProducts::neighbors_of(const std::string& bundle) const {
    for (size_t b = 0; b < bundle_names.size(); ++b)
        if (bundle_names[b] == bundle) {
            std::vector<std::string> out;
            for (int nb : adjacency[b]) out.push_back(bundle_names[nb]);
            return out;
        }
    throw Error("unknown bundle '" + bundle + "'");
}

BlendProducts build_blend_products(const ShapeLibrary& lib, int resolution, int threads,
                                   bool with_nn_field) {
    BlendProducts p;
    p.grid = rasterize_uv(lib.neutral, resolution);
    for (const auto& b : lib.bundles) p.bundle_names.push_back(b.name);

    p.fields.resize(lib.bundles.size());
    const int nb = static_cast<int>(lib.bundles.size());
    threads = std::max(1, threads);
    if (threads == 1) {
        for (int b = 0; b < nb; ++b)
            p.fields[b] = fast_march(p.grid, lib.neutral, lib.bundles[b].attach);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (nb + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int lo = t * chunk, hi = std::min(nb, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (int b = lo; b < hi; ++b)
                    p.fields[b] = fast_march(p.grid, lib.neutral, lib.bundles[b].attach);
            });
        }
        for (auto& th : pool) th.join();
    }

    p.partition = voronoi_partition(p.fields, p.bundle_names);
    p.adjacency = bundle_adjacency(p.grid, p.partition, nb);
    if (with_nn_field) {
        NNConfig nn_cfg;
        nn_cfg.threads = threads;
        p.nn = natural_neighbor_field(p.grid, p.partition, p.fields, p.bundle_names, lib.neutral,
                                      nn_cfg);
        // Widen the neighbor graph with co-occurrence in the weight field: an
        // inserted vertex's cell can steal from two cells that never touch,
        // and the local patches must cover every such pair for the neighbor
        // criterion to disambiguate coincident cloud points.
        std::vector<std::set<int>> extended(nb);
        for (int b = 0; b < nb; ++b) extended[b].insert(p.adjacency[b].begin(),
                                                        p.adjacency[b].end());
        for (const auto& weights : p.nn.vertex_weights)
            for (const auto& [a, wa] : weights)
                for (const auto& [b, wb] : weights)
                    if (a != b) extended[a].insert(static_cast<int>(b));
        for (int b = 0; b < nb; ++b)
            p.adjacency[b].assign(extended[b].begin(), extended[b].end());
    }
    return p;
}

IndexSet build_index_set(const ShapeLibrary& lib, const BlendProducts& products,
                         const PruneConfig& prune, const QualityConfig& quality,
                         const std::vector<double>& jaw_bin_edges, int threads) {
    const int nb = static_cast<int>(lib.bundles.size());
    std::vector<std::vector<BundleIndex>> built(nb);
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&](int lo, int hi) {
        for (int b = lo; b < hi; ++b) {
            try {
                built[b] = build_bundle_index(lib, lib.bundles[b], prune, quality, jaw_bin_edges,
                                              products.neighbors_of(lib.bundles[b].name));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    threads = std::max(1, threads);
    if (threads == 1) {
        work(0, nb);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (nb + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int lo = t * chunk, hi = std::min(nb, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    IndexSet set;
    for (auto& per_bundle : built)
        for (auto& e : per_bundle) set.entries.push_back(std::move(e));
    return set;
}

std::map<std::string, std::map<std::string, double>> frame_weights(const FrameSolution& frame) {
    std::map<std::string, std::map<std::string, double>> out;
    for (const auto& [name, sol] : frame.per_bundle) out[name] = sol.shape_weights;
    return out;
}

std::vector<Vec3> reconstruct_frame(const ShapeLibrary& lib, IndexSet& indices,
                                    const BlendProducts& products,
                                    const std::map<std::string, Vec3>& observed,
                                    const JawPose& pose, FrameSolution* solution_out,
                                    const SolveConfig& cfg, int threads) {
    FrameSolution frame = solve_frame(indices, lib, observed, pose, nullptr, cfg);
    auto positions = blend_frame(lib, products.nn, frame_weights(frame), pose, threads);
    if (solution_out) *solution_out = std::move(frame);
    return positions;
}

std::vector<RoundtripRow> roundtrip(const ShapeLibrary& lib, IndexSet& indices,
                                    const BlendProducts& products, const SolveConfig& cfg,
                                    int threads) {
    std::vector<RoundtripRow> rows;
    for (const auto& shape : lib.shapes) {
        RoundtripRow row;
        row.shape = shape.name;

        row.unreachable = true;
        for (const auto& e : indices.entries) {
            for (const auto& pt : e.cloud.points)
                if (pt.shape == shape.name) {
                    row.unreachable = false;
                    break;
                }
            if (!row.unreachable) break;
        }

        std::map<std::string, Vec3> observed;
        const std::map<std::string, double> weights{{shape.name, 1.0}};
        for (const auto& b : lib.bundles)
            observed[b.name] = eval_bundle(lib, b, weights, shape.jaw);

        const auto reconstructed =
            reconstruct_frame(lib, indices, products, observed, shape.jaw, nullptr, cfg, threads);

        std::vector<Vec3> truth(lib.neutral.positions);
        for (int v = 0; v < lib.neutral.vertex_count(); ++v) truth[v] += shape.disp[v];
        const FrameError err = compare_positions(reconstructed, truth);
        row.rms = err.rms;
        row.max_err = err.max_err;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace lgi
