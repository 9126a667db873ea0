#include "lgi/blend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <queue>
#include <thread>

#include "lgi/error.hpp"

namespace lgi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void parallel_chunks(int n, int threads, const std::function<void(int, int)>& body) {
    threads = std::max(1, threads);
    if (threads == 1 || n < 2 * threads) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::exception_ptr error;
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                body(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

int UVGrid::texel_of_uv(const Vec2& uv) const {
    const int x = std::clamp(static_cast<int>(uv.x * resolution), 0, resolution - 1);
    const int y = std::clamp(static_cast<int>(uv.y * resolution), 0, resolution - 1);
    return covered_at(x, y);
}

int UVGrid::nearest_covered(const Vec2& uv) const {
    const int x = std::clamp(static_cast<int>(uv.x * resolution), 0, resolution - 1);
    const int y = std::clamp(static_cast<int>(uv.y * resolution), 0, resolution - 1);
    for (int r = 0; r < resolution; ++r) {
        int best = -1;
        double best_d2 = kInf;
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
                const int idx = covered_at(x + dx, y + dy);
                if (idx < 0) continue;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = idx;
                }
            }
        if (best >= 0) return best;
    }
    return -1;
}

UVGrid rasterize_uv(const TriMesh& mesh, int resolution) {
    if (resolution < 16) throw Error("UV grid resolution must be >= 16");
    UVGrid grid;
    grid.resolution = resolution;
    grid.lattice.assign(static_cast<size_t>(resolution) * resolution, -1);

    const double texel_uv = 1.0 / resolution;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        const Vec2 a = mesh.uvs[tri[0]], b = mesh.uvs[tri[1]], c = mesh.uvs[tri[2]];
        const double denom = (b - a).cross(c - a);
        if (std::abs(denom) < 1e-14) continue;  // zero UV area, skip

        const double uv_area = 0.5 * std::abs(denom);
        const Vec3 p0 = mesh.positions[tri[0]], p1 = mesh.positions[tri[1]],
                   p2 = mesh.positions[tri[2]];
        const double area3d = 0.5 * (p1 - p0).cross(p2 - p0).norm();
        const double texel_area = (area3d / uv_area) * texel_uv * texel_uv;

        const double min_u = std::min({a.x, b.x, c.x}), max_u = std::max({a.x, b.x, c.x});
        const double min_v = std::min({a.y, b.y, c.y}), max_v = std::max({a.y, b.y, c.y});
        const int x0 = std::clamp(static_cast<int>(std::floor(min_u * resolution - 0.5)), 0,
                                  resolution - 1);
        const int x1 = std::clamp(static_cast<int>(std::ceil(max_u * resolution + 0.5)), 0,
                                  resolution - 1);
        const int y0 = std::clamp(static_cast<int>(std::floor(min_v * resolution - 0.5)), 0,
                                  resolution - 1);
        const int y1 = std::clamp(static_cast<int>(std::ceil(max_v * resolution + 0.5)), 0,
                                  resolution - 1);

        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                auto& slot = grid.lattice[static_cast<size_t>(y) * resolution + x];
                if (slot >= 0) continue;  // first face wins
                const Vec2 p{(x + 0.5) * texel_uv, (y + 0.5) * texel_uv};
                const double w1 = (p - a).cross(c - a) / denom;
                const double w2 = (b - a).cross(p - a) / denom;
                const double w0 = 1.0 - w1 - w2;
                const double eps = 1e-12;
                if (w0 < -eps || w1 < -eps || w2 < -eps) continue;
                UVGrid::Texel t;
                t.x = x;
                t.y = y;
                t.face = static_cast<int>(f);
                t.bary = {std::max(w0, 0.0), std::max(w1, 0.0), std::max(w2, 0.0)};
                t.pos = p0 * t.bary[0] + p1 * t.bary[1] + p2 * t.bary[2];
                t.area = texel_area;
                slot = static_cast<int32_t>(grid.texels.size());
                grid.texels.push_back(t);
            }
    }

    for (const auto& t : grid.texels)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nb = grid.covered_at(t.x + dx, t.y + dy);
                if (nb >= 0)
                    grid.max_step = std::max(grid.max_step, (grid.texels[nb].pos - t.pos).norm());
            }
    return grid;
}

namespace {

struct HeapEntry {
    double dist;
    int texel;
    bool operator>(const HeapEntry& o) const {
        return dist > o.dist || (dist == o.dist && texel > o.texel);
    }
};

using MinHeap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<HeapEntry>>;

// Shared propagation core. `limit < 0` marches the whole chart.
void march(const UVGrid& grid, const Vec2& seed_uv, const Vec3& seed_pos, double limit,
           MarchScratch& scratch, std::vector<std::pair<int, double>>* collect,
           DistanceField* full) {
    const size_t n = grid.texels.size();
    if (scratch.dist.size() != n) {
        scratch.dist.assign(n, kInf);
        scratch.state.assign(n, 0);
    }
    for (int t : scratch.touched) {
        scratch.dist[t] = kInf;
        scratch.state[t] = 0;
    }
    scratch.touched.clear();

    const int seed_texel = grid.texel_of_uv(seed_uv) >= 0 ? grid.texel_of_uv(seed_uv)
                                                          : grid.nearest_covered(seed_uv);
    if (seed_texel < 0) throw Error("march seed lies outside the covered chart");

    MinHeap heap;
    const double d0 = (grid.texels[seed_texel].pos - seed_pos).norm();
    scratch.dist[seed_texel] = d0;
    scratch.touched.push_back(seed_texel);
    heap.push({d0, seed_texel});

    while (!heap.empty()) {
        const auto [d, t] = heap.top();
        heap.pop();
        if (scratch.state[t]) continue;
        if (limit >= 0.0 && d > limit) break;
        scratch.state[t] = 1;
        if (collect) collect->push_back({t, d});

        const auto& tx = grid.texels[t];
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nb = grid.covered_at(tx.x + dx, tx.y + dy);
                if (nb < 0 || scratch.state[nb]) continue;
                const double nd = d + (grid.texels[nb].pos - tx.pos).norm();
                if (nd < scratch.dist[nb]) {
                    if (scratch.dist[nb] == kInf) scratch.touched.push_back(nb);
                    scratch.dist[nb] = nd;
                    heap.push({nd, nb});
                }
            }
    }
    if (full) {
        full->assign(n, kInf);
        for (int t : scratch.touched)
            if (scratch.state[t]) (*full)[t] = scratch.dist[t];
    }
}

}  // namespace

DistanceField fast_march(const UVGrid& grid, const Vec2& seed_uv, const Vec3& seed_pos) {
    MarchScratch scratch;
    DistanceField field;
    march(grid, seed_uv, seed_pos, -1.0, scratch, nullptr, &field);
    return field;
}

void fast_march_local(const UVGrid& grid, const Vec2& seed_uv, const Vec3& seed_pos,
                      double limit, MarchScratch& scratch,
                      std::vector<std::pair<int, double>>& out) {
    march(grid, seed_uv, seed_pos, limit, scratch, &out, nullptr);
}

VoronoiPartition voronoi_partition(const std::vector<DistanceField>& fields,
                                   const std::vector<std::string>& bundle_names) {
    if (fields.empty()) throw Error("voronoi_partition needs at least one field");
    const size_t n = fields[0].size();
    VoronoiPartition part;
    part.owner.assign(n, -1);
    part.distance.assign(n, kInf);
    part.runner_up_gap.assign(n, kInf);
    for (size_t b = 0; b < fields.size(); ++b) {
        if (fields[b].size() != n) throw Error("distance fields disagree on grid size");
        for (size_t t = 0; t < n; ++t) {
            const double d = fields[b][t];
            if (d < part.distance[t] ||
                (d == part.distance[t] && part.owner[t] >= 0 &&
                 bundle_names[b] < bundle_names[part.owner[t]])) {
                if (part.owner[t] >= 0)
                    part.runner_up_gap[t] = std::max(part.distance[t] - d, 0.0);
                part.distance[t] = d;
                part.owner[t] = static_cast<int32_t>(b);
            } else if (d - part.distance[t] < part.runner_up_gap[t]) {
                part.runner_up_gap[t] = d - part.distance[t];
            }
        }
    }
    return part;
}

std::vector<std::vector<int>> bundle_adjacency(const UVGrid& grid,
                                               const VoronoiPartition& partition,
                                               int bundle_count) {
    std::vector<std::set<int>> adj(bundle_count);
    for (const auto& t : grid.texels) {
        const int self = static_cast<int>(&t - grid.texels.data());
        const int a = partition.owner[self];
        if (a < 0) continue;
        for (const auto& [dx, dy] : std::array<std::pair<int, int>, 2>{{{1, 0}, {0, 1}}}) {
            const int nb = grid.covered_at(t.x + dx, t.y + dy);
            if (nb < 0) continue;
            const int b = partition.owner[nb];
            if (b >= 0 && b != a) {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    std::vector<std::vector<int>> out(bundle_count);
    for (int b = 0; b < bundle_count; ++b) out[b].assign(adj[b].begin(), adj[b].end());
    return out;
}

namespace {

// Insertion march: the inserted cell is star-shaped around the seed, so the
// front only needs to expand through texels that are themselves stolen
// (distance to the seed no larger than to their current owner).
void steal_march(const UVGrid& grid, const VoronoiPartition& partition, double steal_eps,
                 const Vec2& seed_uv, const Vec3& seed_pos, MarchScratch& scratch,
                 std::vector<std::pair<int, double>>& out) {
    const size_t n = grid.texels.size();
    if (scratch.dist.size() != n) {
        scratch.dist.assign(n, kInf);
        scratch.state.assign(n, 0);
    }
    for (int t : scratch.touched) {
        scratch.dist[t] = kInf;
        scratch.state[t] = 0;
    }
    scratch.touched.clear();

    int seed_texel = grid.texel_of_uv(seed_uv);
    if (seed_texel < 0) seed_texel = grid.nearest_covered(seed_uv);
    if (seed_texel < 0) throw Error("march seed lies outside the covered chart");

    MinHeap heap;
    const double d0 = (grid.texels[seed_texel].pos - seed_pos).norm();
    scratch.dist[seed_texel] = d0;
    scratch.touched.push_back(seed_texel);
    heap.push({d0, seed_texel});

    while (!heap.empty()) {
        const auto [d, t] = heap.top();
        heap.pop();
        if (scratch.state[t]) continue;
        scratch.state[t] = 1;
        if (d > partition.distance[t] + steal_eps) continue;  // boundary, stop here
        out.push_back({t, d});

        const auto& tx = grid.texels[t];
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nb = grid.covered_at(tx.x + dx, tx.y + dy);
                if (nb < 0 || scratch.state[nb]) continue;
                const double nd = d + (grid.texels[nb].pos - tx.pos).norm();
                if (nd < scratch.dist[nb]) {
                    if (scratch.dist[nb] == kInf) scratch.touched.push_back(nb);
                    scratch.dist[nb] = nd;
                    heap.push({nd, nb});
                }
            }
    }
}

}  // namespace

NNWeightField natural_neighbor_field(const UVGrid& grid, const VoronoiPartition& partition,
                                     const std::vector<DistanceField>& /*fields*/,
                                     const std::vector<std::string>& bundle_names,
                                     const TriMesh& mesh, const NNConfig& cfg) {
    const int nv = mesh.vertex_count();
    const int nb = static_cast<int>(bundle_names.size());
    NNWeightField nn;
    nn.bundles = bundle_names;
    nn.vertex_weights.resize(nv);
    nn.flagged.assign(nv, 0);

    const double steal_eps = 1e-7 * std::max(grid.max_step, 1e-300);
    const double chart_bound = 4.0 * grid.max_step * grid.resolution;

    parallel_chunks(nv, cfg.threads, [&](int lo, int hi) {
        MarchScratch scratch;
        std::vector<std::pair<int, double>> local;
        std::vector<double> stolen(nb);
        for (int v = lo; v < hi; ++v) {
            const Vec2 uv = mesh.uvs[v];
            int texel = grid.texel_of_uv(uv);
            if (texel < 0) texel = grid.nearest_covered(uv);
            if (texel < 0) throw Error("mesh vertex outside the covered chart");

            local.clear();
            if (cfg.local_distance) {
                cfg.local_distance(grid, uv, mesh.positions[v], chart_bound, scratch, local);
            } else {
                steal_march(grid, partition, steal_eps, uv, mesh.positions[v], scratch, local);
            }

            std::fill(stolen.begin(), stolen.end(), 0.0);
            for (const auto& [t, d] : local)
                if (d <= partition.distance[t] + steal_eps && partition.owner[t] >= 0)
                    stolen[partition.owner[t]] += grid.texels[t].area;

            double total = 0.0;
            for (double s : stolen) total += s;
            auto& weights = nn.vertex_weights[v];
            if (total <= 0.0) {
                if (partition.owner[texel] < 0)
                    throw Error("vertex " + std::to_string(v) +
                                " is unreachable from every bundle site");
                weights.push_back({static_cast<uint32_t>(partition.owner[texel]), 1.0});
                nn.flagged[v] = 1;
                continue;
            }
            for (int b = 0; b < nb; ++b)
                if (stolen[b] > 0.0)
                    weights.push_back({static_cast<uint32_t>(b), stolen[b] / total});
        }
    });
    return nn;
}

NNWeightField rbf_blend_field(const UVGrid& grid, const std::vector<DistanceField>& fields,
                              const std::vector<std::string>& bundle_names, const TriMesh& mesh,
                              double sigma) {
    if (sigma <= 0.0) throw Error("rbf sigma must be positive");
    const int nv = mesh.vertex_count();
    NNWeightField out;
    out.bundles = bundle_names;
    out.vertex_weights.resize(nv);
    out.flagged.assign(nv, 0);
    for (int v = 0; v < nv; ++v) {
        int texel = grid.texel_of_uv(mesh.uvs[v]);
        if (texel < 0) texel = grid.nearest_covered(mesh.uvs[v]);
        double total = 0.0;
        std::vector<double> w(bundle_names.size(), 0.0);
        int nearest = 0;
        double nearest_d = kInf;
        for (size_t b = 0; b < fields.size(); ++b) {
            const double g = fields[b][texel];
            if (g < nearest_d) {
                nearest_d = g;
                nearest = static_cast<int>(b);
            }
            if (std::isfinite(g)) {
                w[b] = std::exp(-g * g / (2.0 * sigma * sigma));
                total += w[b];
            }
        }
        if (total <= 0.0) {
            out.vertex_weights[v].push_back({static_cast<uint32_t>(nearest), 1.0});
            out.flagged[v] = 1;
            continue;
        }
        for (size_t b = 0; b < w.size(); ++b)
            if (w[b] > 0.0)
                out.vertex_weights[v].push_back({static_cast<uint32_t>(b), w[b] / total});
    }
    return out;
}

std::vector<Vec3> blend_frame(const ShapeLibrary& lib, const NNWeightField& nn,
                              const std::map<std::string, std::map<std::string, double>>&
                                  bundle_shape_weights,
                              const JawPose& pose, int threads) {
    const int nv = lib.neutral.vertex_count();
    if (static_cast<int>(nn.vertex_weights.size()) != nv)
        throw Error("blend_frame: weight field does not match the mesh");

    // Resolve each bundle's sparse shape weights to shape indices (-1 = neutral).
    const int ns = static_cast<int>(lib.shapes.size());
    std::vector<std::vector<std::pair<int, double>>> resolved(nn.bundles.size());
    for (size_t b = 0; b < nn.bundles.size(); ++b) {
        const auto it = bundle_shape_weights.find(nn.bundles[b]);
        if (it == bundle_shape_weights.end())
            throw Error("blend_frame: no solution for bundle '" + nn.bundles[b] + "'");
        for (const auto& [name, w] : it->second) {
            if (name == kNeutralName) {
                resolved[b].push_back({-1, w});
            } else {
                const int s = lib.shape_index(name);
                if (s < 0) throw Error("blend_frame: unknown shape '" + name + "'");
                resolved[b].push_back({s, w});
            }
        }
    }

    std::vector<Vec3> out(nv);
    parallel_chunks(nv, threads, [&](int lo, int hi) {
        std::vector<double> acc(ns, 0.0);
        std::vector<int> touched;
        for (int v = lo; v < hi; ++v) {
            for (int s : touched) acc[s] = 0.0;
            touched.clear();
            for (const auto& [b, wb] : nn.vertex_weights[v]) {
                for (const auto& [s, ws] : resolved[b]) {
                    if (s < 0) continue;  // neutral contributes nothing
                    if (acc[s] == 0.0) touched.push_back(s);
                    acc[s] += wb * ws;
                }
            }
            Vec3 p = lib.neutral.positions[v];
            for (int s : touched) p += lib.shapes[s].disp_unskinned[v] * acc[s];
            out[v] = blended_vertex_transform(lib, v, pose).apply(p);
        }
    });
    return out;
}

std::vector<Vec3> baseline_displacement_interp(const ShapeLibrary& lib, const NNWeightField& nn,
                                               const std::map<std::string, Vec3>& observed,
                                               const JawPose& pose) {
    std::vector<Vec3> skinned = skin_positions(lib, lib.neutral.positions, pose);
    std::vector<Vec3> deltas(nn.bundles.size());
    for (size_t b = 0; b < nn.bundles.size(); ++b) {
        const auto it = observed.find(nn.bundles[b]);
        if (it == observed.end()) continue;  // unobserved bundles stay at rest
        const BundleDef* def = lib.find_bundle(nn.bundles[b]);
        if (!def) throw Error("baseline: unknown bundle '" + nn.bundles[b] + "'");
        deltas[b] = it->second - eval_surface_point(skinned, lib.neutral, def->attach);
    }
    for (int v = 0; v < lib.neutral.vertex_count(); ++v) {
        Vec3 d;
        for (const auto& [b, w] : nn.vertex_weights[v]) d += deltas[b] * w;
        skinned[v] += d;
    }
    return skinned;
}

void save_nn_field(const NNWeightField& nn, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open file for writing: " + path);
    auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    out.write("LGNN", 4);
    u32(static_cast<uint32_t>(nn.bundles.size()));
    for (const auto& name : nn.bundles) {
        u32(static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    u32(static_cast<uint32_t>(nn.vertex_weights.size()));
    for (size_t v = 0; v < nn.vertex_weights.size(); ++v) {
        u32(static_cast<uint32_t>(nn.vertex_weights[v].size()));
        for (const auto& [b, w] : nn.vertex_weights[v]) {
            u32(b);
            const float f = static_cast<float>(w);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
        out.put(static_cast<char>(nn.flagged[v]));
    }
}

NNWeightField load_nn_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "LGNN", 4) != 0)
        throw ValidationError(path + ": not an LGNN weight-field file");
    auto u32 = [&]() {
        uint32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        if (!in) throw ValidationError("truncated LGNN file");
        return v;
    };
    NNWeightField nn;
    nn.bundles.resize(u32());
    for (auto& name : nn.bundles) {
        name.resize(u32());
        in.read(name.data(), static_cast<std::streamsize>(name.size()));
    }
    nn.vertex_weights.resize(u32());
    nn.flagged.resize(nn.vertex_weights.size());
    for (size_t v = 0; v < nn.vertex_weights.size(); ++v) {
        nn.vertex_weights[v].resize(u32());
        for (auto& [b, w] : nn.vertex_weights[v]) {
            b = u32();
            float f;
            in.read(reinterpret_cast<char*>(&f), 4);
            w = f;
        }
        nn.flagged[v] = static_cast<uint8_t>(in.get());
    }
    return nn;
}

void save_voronoi_pgm(const UVGrid& grid, const VoronoiPartition& partition, int bundle_count,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open file for writing: " + path);
    const int res = grid.resolution;
    out << "P5\n" << res << " " << res << "\n255\n";
    for (int y = res - 1; y >= 0; --y)
        for (int x = 0; x < res; ++x) {
            const int t = grid.covered_at(x, y);
            uint8_t v = 0;
            if (t >= 0 && partition.owner[t] >= 0)
                v = static_cast<uint8_t>(32 + (partition.owner[t] * 223) /
                                                  std::max(bundle_count - 1, 1));
            out.put(static_cast<char>(v));
        }
}

void save_weight_pgm(const UVGrid& grid, const TriMesh& mesh, const NNWeightField& nn,
                     uint32_t bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open file for writing: " + path);
    const int res = grid.resolution;
    out << "P5\n" << res << " " << res << "\n255\n";
    for (int y = res - 1; y >= 0; --y)
        for (int x = 0; x < res; ++x) {
            const int t = grid.covered_at(x, y);
            uint8_t v = 0;
            if (t >= 0) {
                const auto& tx = grid.texels[t];
                const auto& tri = mesh.faces[tx.face];
                double w = 0.0;
                for (int i = 0; i < 3; ++i) w += tx.bary[i] * nn.weight(tri[i], bundle);
                v = static_cast<uint8_t>(std::clamp(w, 0.0, 1.0) * 255.0);
            }
            out.put(static_cast<char>(v));
        }
}

}  // namespace lgi
