#include "lgi/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lgi/error.hpp"

namespace lgi {

namespace {

uint64_t choose4(uint64_t n) {
    if (n < 4) return 0;
    return n * (n - 1) * (n - 2) * (n - 3) / 24;
}

bool tags_allow(const std::set<std::string>& shape_tags, const std::set<std::string>& bundle_tags) {
    // An empty tag set on either side is a wildcard.
    if (shape_tags.empty() || bundle_tags.empty()) return true;
    for (const auto& t : shape_tags)
        if (bundle_tags.count(t)) return true;
    return false;
}

Vec3 eval_unskinned(const ShapeLibrary& lib, const SurfacePoint& sp,
                    const std::vector<Vec3>* disp_unskinned) {
    const auto& tri = lib.neutral.faces[sp.face];
    Vec3 p;
    for (int i = 0; i < 3; ++i) {
        Vec3 v = lib.neutral.positions[tri[i]];
        if (disp_unskinned) v += (*disp_unskinned)[tri[i]];
        p += v * sp.bary[i];
    }
    return p;
}

}  // namespace

Box3 BundleCloud::bounds() const {
    Box3 b;
    for (const auto& pt : points) b.expand(pt.pos);
    return b;
}

std::vector<const BundleIndex*> IndexSet::for_bundle(const std::string& name) const {
    std::vector<const BundleIndex*> out;
    for (const auto& e : entries)
        if (e.cloud.bundle == name) out.push_back(&e);
    return out;
}

const BundleIndex* IndexSet::for_bundle_at(const std::string& name, double rot) const {
    const BundleIndex* last = nullptr;
    for (const auto& e : entries) {
        if (e.cloud.bundle != name) continue;
        if (!e.cloud.jaw_bin) return &e;  // unbinned
        const auto [lo, hi] = *e.cloud.jaw_bin;
        if (rot >= lo && rot < hi) return &e;
        last = &e;
    }
    return last;  // bins are closed-open except the last, which is closed
}

BundleIndex* IndexSet::mutable_for_bundle_at(const std::string& name, double rot) {
    return const_cast<BundleIndex*>(
        static_cast<const IndexSet*>(this)->for_bundle_at(name, rot));
}

BundleCloud build_cloud(const ShapeLibrary& lib, const BundleDef& bundle,
                        const PruneConfig& cfg,
                        const std::vector<std::string>& neighbor_bundles,
                        const std::vector<char>* shape_filter) {
    const double min_disp = cfg.min_disp_frac * lib.bbox_diag;
    const double dedupe_eps = cfg.dedupe_frac * lib.bbox_diag;

    BundleCloud cloud;
    cloud.bundle = bundle.name;

    auto neighbor_map = [&](const std::vector<Vec3>* disp) {
        std::map<std::string, Vec3> m;
        for (const auto& nb : neighbor_bundles) {
            const BundleDef* nbd = lib.find_bundle(nb);
            if (!nbd) throw Error("unknown neighbor bundle '" + nb + "'");
            m[nb] = eval_unskinned(lib, nbd->attach, disp);
        }
        return m;
    };

    CloudPoint neutral;
    neutral.shape = kNeutralName;
    neutral.pos = eval_unskinned(lib, bundle.attach, nullptr);
    neutral.neighbor_evals = neighbor_map(nullptr);
    cloud.points.push_back(std::move(neutral));

    for (size_t s = 0; s < lib.shapes.size(); ++s) {
        if (shape_filter && !(*shape_filter)[s]) continue;
        const Shape& shape = lib.shapes[s];
        if (cfg.tag_prune && !tags_allow(shape.tags, bundle.region_tags)) continue;
        const Vec3 pos = eval_unskinned(lib, bundle.attach, &shape.disp_unskinned);
        if ((pos - cloud.points[0].pos).norm() < min_disp) continue;

        CloudPoint pt;
        pt.shape = shape.name;
        pt.pos = pos;
        pt.neighbor_evals = neighbor_map(&shape.disp_unskinned);

        // A point is redundant only if an earlier point matches in position
        // AND in its local patch; coincident positions with different
        // neighborhoods are distinct candidates, not duplicates.
        bool duplicate = false;
        for (const auto& existing : cloud.points) {
            if ((existing.pos - pos).norm() >= dedupe_eps) continue;
            bool same_patch = true;
            for (const auto& [nb, eval] : pt.neighbor_evals) {
                const auto it = existing.neighbor_evals.find(nb);
                if (it == existing.neighbor_evals.end() ||
                    (it->second - eval).norm() >= dedupe_eps) {
                    same_patch = false;
                    break;
                }
            }
            if (same_patch) {
                duplicate = true;  // keep the earliest
                break;
            }
        }
        if (!duplicate) cloud.points.push_back(std::move(pt));
    }
    return cloud;
}

TetSet enumerate_tets(const BundleCloud& cloud, const QualityConfig& cfg) {
    const uint32_t n = static_cast<uint32_t>(cloud.points.size());
    TetSet out;
    if (n < 4) {
        out.projection_only = true;
        return out;
    }
    if (choose4(n) > cfg.combinatorial_cap)
        throw CapExceeded("bundle '" + cloud.bundle + "': C(" + std::to_string(n) +
                          ",4) tetrahedra exceed the cap of " +
                          std::to_string(cfg.combinatorial_cap) +
                          "; tighten pruning or enable jaw binning");

    const double d = cloud.diagonal();
    const double min_vol = cfg.min_vol_frac * d * d * d;
    const double max_edge = cfg.max_extent_frac * d;

    for (uint32_t a = 0; a + 3 < n; ++a)
        for (uint32_t b = a + 1; b + 2 < n; ++b)
            for (uint32_t c = b + 1; c + 1 < n; ++c)
                for (uint32_t e = c + 1; e < n; ++e) {
                    const Vec3& q0 = cloud.points[a].pos;
                    const Vec3& q1 = cloud.points[b].pos;
                    const Vec3& q2 = cloud.points[c].pos;
                    const Vec3& q3 = cloud.points[e].pos;
                    const double vol = std::abs(tet_signed_volume(q0, q1, q2, q3));
                    if (vol < min_vol || vol == 0.0) continue;

                    const std::array<Vec3, 4> v{q0, q1, q2, q3};
                    double longest = 0.0;
                    for (int i = 0; i < 4; ++i)
                        for (int j = i + 1; j < 4; ++j)
                            longest = std::max(longest, (v[i] - v[j]).norm());
                    if (longest > max_edge) continue;

                    // min altitude = 3*vol / largest face area
                    double max_face_area = 0.0;
                    const std::array<std::array<int, 3>, 4> faces{
                        {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}}};
                    for (const auto& f : faces) {
                        const double area =
                            0.5 * (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]).norm();
                        max_face_area = std::max(max_face_area, area);
                    }
                    const double min_altitude = 3.0 * vol / max_face_area;
                    const double aspect = longest / min_altitude;
                    if (aspect > cfg.max_aspect) continue;

                    out.tets.push_back(Tetra::canonical(a, b, c, e));
                    out.quality.push_back(aspect);
                }
    if (out.tets.empty()) out.projection_only = true;
    return out;
}

int UniformGrid::cell_of(const Vec3& p) const {
    if (!bounds.contains(p)) return -1;
    const Vec3 ext = bounds.extent();
    std::array<int, 3> c{};
    for (int axis = 0; axis < 3; ++axis) {
        const double e = ext[axis];
        const double t = e > 0.0 ? ((p[axis] - bounds.lo[axis]) / e) : 0.0;
        c[axis] = std::min(static_cast<int>(t * dims[axis]), static_cast<int>(dims[axis]) - 1);
        c[axis] = std::max(c[axis], 0);
    }
    return (c[2] * static_cast<int>(dims[1]) + c[1]) * static_cast<int>(dims[0]) + c[0];
}

UniformGrid build_grid(const TetSet& tets, const BundleCloud& cloud) {
    UniformGrid grid;
    const double pad = 1e-9 * std::max(cloud.diagonal(), 1e-30);
    grid.bounds = cloud.bounds().inflated(0.05, pad);

    const uint32_t per_axis = static_cast<uint32_t>(std::clamp(
        std::ceil(std::cbrt(static_cast<double>(std::max<size_t>(tets.tets.size(), 1)) / 8.0)),
        1.0, 64.0));
    grid.dims = {per_axis, per_axis, per_axis};
    grid.cells.assign(static_cast<size_t>(per_axis) * per_axis * per_axis, {});

    const Vec3 ext = grid.bounds.extent();
    auto cell_range = [&](double lo, double hi, int axis) {
        const double e = ext[axis];
        int a = 0, b = 0;
        if (e > 0.0) {
            a = static_cast<int>(((lo - grid.bounds.lo[axis]) / e) * per_axis);
            b = static_cast<int>(((hi - grid.bounds.lo[axis]) / e) * per_axis);
            a = std::clamp(a, 0, static_cast<int>(per_axis) - 1);
            b = std::clamp(b, 0, static_cast<int>(per_axis) - 1);
        }
        return std::pair<int, int>{a, b};
    };

    for (size_t t = 0; t < tets.tets.size(); ++t) {
        Box3 bb;
        for (uint32_t id : tets.tets[t].ids) bb.expand(cloud.points[id].pos);
        // Slack so tolerance-band containment hits stay inside registered cells.
        bb = bb.inflated(1e-6, 1e-12 * cloud.diagonal());
        const auto [x0, x1] = cell_range(bb.lo.x, bb.hi.x, 0);
        const auto [y0, y1] = cell_range(bb.lo.y, bb.hi.y, 1);
        const auto [z0, z1] = cell_range(bb.lo.z, bb.hi.z, 2);
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    grid.cells[(static_cast<size_t>(z) * per_axis + y) * per_axis + x].push_back(
                        static_cast<uint32_t>(t));
    }
    return grid;
}

std::vector<ContainmentHit> query_containing(const BundleIndex& index, const Vec3& p,
                                             double tol) {
    std::vector<ContainmentHit> hits;
    if (index.tets.tets.empty()) return hits;
    const int cell = index.grid.cell_of(p);
    if (cell < 0) return hits;
    for (uint32_t t : index.grid.cells[cell]) {
        const auto& ids = index.tets.tets[t].ids;
        std::array<double, 4> w;
        try {
            w = tet_barycentric(p, index.cloud.points[ids[0]].pos, index.cloud.points[ids[1]].pos,
                                index.cloud.points[ids[2]].pos, index.cloud.points[ids[3]].pos);
        } catch (const DegenerateTet&) {
            continue;
        }
        if (w[0] < -tol || w[1] < -tol || w[2] < -tol || w[3] < -tol) continue;
        double sum = 0.0;
        for (double& x : w) {
            x = std::max(x, 0.0);
            sum += x;
        }
        for (double& x : w) x /= sum;
        hits.push_back({t, w});
    }
    std::sort(hits.begin(), hits.end(),
              [](const ContainmentHit& a, const ContainmentHit& b) { return a.tet < b.tet; });
    return hits;
}

namespace {

ProjectionHit project_simplex(const BundleCloud& cloud, const std::vector<uint32_t>& ids,
                              const Vec3& p, int tet_index) {
    std::vector<Vec3> verts;
    verts.reserve(ids.size());
    for (uint32_t id : ids) verts.push_back(cloud.points[id].pos);
    auto r = closest_point_on_simplex(p, verts);
    return {ids, std::move(r.weights), r.point, r.distance, tet_index};
}

std::vector<ProjectionHit> projection_targets(const BundleIndex& index, const Vec3& p) {
    std::vector<ProjectionHit> hits;
    const auto& cloud = index.cloud;
    if (!index.tets.tets.empty()) {
        hits.reserve(index.tets.tets.size());
        for (size_t t = 0; t < index.tets.tets.size(); ++t) {
            const auto& ids = index.tets.tets[t].ids;
            hits.push_back(project_simplex(cloud, {ids.begin(), ids.end()}, p,
                                           static_cast<int>(t)));
        }
        return hits;
    }
    const uint32_t n = static_cast<uint32_t>(cloud.points.size());
    if (n >= 3) {
        for (uint32_t a = 0; a + 2 < n; ++a)
            for (uint32_t b = a + 1; b + 1 < n; ++b)
                for (uint32_t c = b + 1; c < n; ++c)
                    hits.push_back(project_simplex(cloud, {a, b, c}, p, -1));
    } else if (n == 2) {
        hits.push_back(project_simplex(cloud, {0, 1}, p, -1));
    } else {
        hits.push_back(project_simplex(cloud, {0}, p, -1));
    }
    return hits;
}

}  // namespace

ProjectionHit project_to_index(const BundleIndex& index, const Vec3& p) {
    auto hits = projection_targets(index, p);
    const ProjectionHit* best = nullptr;
    for (const auto& h : hits) {
        if (!best || h.distance < best->distance ||
            (h.distance == best->distance && h.simplex < best->simplex))
            best = &h;
    }
    return *best;
}

std::vector<ProjectionHit> project_all(const BundleIndex& index, const Vec3& p, double tie_tol) {
    auto hits = projection_targets(index, p);
    double best = std::numeric_limits<double>::max();
    for (const auto& h : hits) best = std::min(best, h.distance);
    std::vector<ProjectionHit> out;
    for (auto& h : hits)
        if (h.distance <= best + tie_tol) out.push_back(std::move(h));
    std::sort(out.begin(), out.end(), [](const ProjectionHit& a, const ProjectionHit& b) {
        return a.simplex < b.simplex;
    });
    return out;
}

std::vector<BundleCloud> bin_clouds_by_jaw(const ShapeLibrary& lib, const BundleDef& bundle,
                                           const std::vector<double>& bin_edges,
                                           const PruneConfig& cfg,
                                           const std::vector<std::string>& neighbor_bundles) {
    std::vector<BundleCloud> out;
    if (bin_edges.empty()) {
        out.push_back(build_cloud(lib, bundle, cfg, neighbor_bundles));
        return out;
    }
    if (!std::is_sorted(bin_edges.begin(), bin_edges.end()))
        throw Error("jaw bin edges must be ascending");

    const double inf = std::numeric_limits<double>::infinity();
    for (size_t bin = 0; bin <= bin_edges.size(); ++bin) {
        const double lo = bin == 0 ? -inf : bin_edges[bin - 1];
        const double hi = bin == bin_edges.size() ? inf : bin_edges[bin];
        std::vector<char> filter(lib.shapes.size(), 0);
        for (size_t s = 0; s < lib.shapes.size(); ++s) {
            const double rot = lib.shapes[s].jaw.rot;
            const bool in_bin = bin == bin_edges.size() ? (rot >= lo) : (rot >= lo && rot < hi);
            filter[s] = in_bin ? 1 : 0;
        }
        BundleCloud cloud = build_cloud(lib, bundle, cfg, neighbor_bundles, &filter);
        cloud.jaw_bin = {lo, hi};
        out.push_back(std::move(cloud));
    }
    return out;
}

std::vector<BundleIndex> build_bundle_index(const ShapeLibrary& lib, const BundleDef& bundle,
                                            const PruneConfig& prune, const QualityConfig& quality,
                                            const std::vector<double>& jaw_bin_edges,
                                            const std::vector<std::string>& neighbor_bundles) {
    std::vector<BundleIndex> out;
    for (auto& cloud : bin_clouds_by_jaw(lib, bundle, jaw_bin_edges, prune, neighbor_bundles)) {
        BundleIndex idx;
        idx.tets = enumerate_tets(cloud, quality);
        idx.dedupe_eps = prune.dedupe_frac * lib.bbox_diag;
        if (!idx.tets.tets.empty()) idx.grid = build_grid(idx.tets, cloud);
        idx.usage.assign(idx.tets.tets.size(), 0);
        idx.cloud = std::move(cloud);
        out.push_back(std::move(idx));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Binary cache (magic LGI1, little-endian)

namespace {

struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw Error("cannot open index file for writing: " + path);
    }
    void bytes(const void* p, size_t n) { out.write(static_cast<const char*>(p), n); }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u32(uint32_t v) { bytes(&v, 4); }
    void u64(uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void vec3(const Vec3& v) { f64(v.x); f64(v.y); f64(v.z); }
};

struct Reader {
    std::ifstream in;
    explicit Reader(const std::string& path) : in(path, std::ios::binary) {
        if (!in) throw Error("cannot open index file: " + path);
    }
    void bytes(void* p, size_t n) {
        in.read(static_cast<char*>(p), n);
        if (!in) throw ValidationError("truncated index file");
    }
    uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
    uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
    uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
    std::string str() {
        const uint32_t n = u32();
        std::string s(n, '\0');
        if (n) bytes(s.data(), n);
        return s;
    }
    Vec3 vec3() { Vec3 v; v.x = f64(); v.y = f64(); v.z = f64(); return v; }
};

}  // namespace

void save_index(const IndexSet& set, const std::string& path) {
    // String table: deterministic first-use order.
    std::vector<std::string> strings;
    std::map<std::string, uint32_t> string_ids;
    auto intern = [&](const std::string& s) {
        auto it = string_ids.find(s);
        if (it != string_ids.end()) return it->second;
        const uint32_t id = static_cast<uint32_t>(strings.size());
        strings.push_back(s);
        string_ids.emplace(s, id);
        return id;
    };
    for (const auto& e : set.entries) {
        intern(e.cloud.bundle);
        for (const auto& p : e.cloud.points) {
            intern(p.shape);
            for (const auto& [nb, _] : p.neighbor_evals) intern(nb);
        }
    }

    Writer w(path);
    w.bytes("LGI1", 4);
    w.u32(static_cast<uint32_t>(strings.size()));
    for (const auto& s : strings) w.str(s);
    w.u32(static_cast<uint32_t>(set.entries.size()));
    for (const auto& e : set.entries) {
        w.u32(string_ids.at(e.cloud.bundle));
        w.u8(e.cloud.jaw_bin ? 1 : 0);
        if (e.cloud.jaw_bin) {
            w.f64(e.cloud.jaw_bin->first);
            w.f64(e.cloud.jaw_bin->second);
        }
        w.f64(e.dedupe_eps);
        w.u32(static_cast<uint32_t>(e.cloud.points.size()));
        for (const auto& p : e.cloud.points) {
            w.u32(string_ids.at(p.shape));
            w.vec3(p.pos);
            w.u32(static_cast<uint32_t>(p.neighbor_evals.size()));
            for (const auto& [nb, pos] : p.neighbor_evals) {
                w.u32(string_ids.at(nb));
                w.vec3(pos);
            }
        }
        w.u32(static_cast<uint32_t>(e.tets.tets.size()));
        for (const auto& t : e.tets.tets)
            for (uint32_t id : t.ids) w.u32(id);
        for (double q : e.tets.quality) w.f64(q);
        w.u8(e.tets.projection_only ? 1 : 0);
        w.vec3(e.grid.bounds.lo);
        w.vec3(e.grid.bounds.hi);
        for (uint32_t d : e.grid.dims) w.u32(d);
        w.u32(static_cast<uint32_t>(e.grid.cells.size()));
        for (const auto& cell : e.grid.cells) {
            w.u32(static_cast<uint32_t>(cell.size()));
            for (uint32_t t : cell) w.u32(t);
        }
        for (uint64_t u : e.usage) w.u64(u);
        w.u32(static_cast<uint32_t>(e.blacklist.size()));
        for (const auto& t : e.blacklist)
            for (uint32_t id : t.ids) w.u32(id);
    }
}

IndexSet load_index(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "LGI1", 4) != 0)
        throw ValidationError(path + ": not an LGI1 index file");
    const uint32_t nstr = r.u32();
    std::vector<std::string> strings(nstr);
    for (auto& s : strings) s = r.str();
    auto str_at = [&](uint32_t id) -> const std::string& {
        if (id >= strings.size()) throw ValidationError("index string id out of range");
        return strings[id];
    };

    IndexSet set;
    const uint32_t nentries = r.u32();
    set.entries.resize(nentries);
    for (auto& e : set.entries) {
        e.cloud.bundle = str_at(r.u32());
        if (r.u8()) {
            const double lo = r.f64(), hi = r.f64();
            e.cloud.jaw_bin = {lo, hi};
        }
        e.dedupe_eps = r.f64();
        e.cloud.points.resize(r.u32());
        for (auto& p : e.cloud.points) {
            p.shape = str_at(r.u32());
            p.pos = r.vec3();
            const uint32_t nnb = r.u32();
            for (uint32_t i = 0; i < nnb; ++i) {
                const std::string nb = str_at(r.u32());
                p.neighbor_evals[nb] = r.vec3();
            }
        }
        const uint32_t ntets = r.u32();
        e.tets.tets.resize(ntets);
        for (auto& t : e.tets.tets)
            for (auto& id : t.ids) id = r.u32();
        e.tets.quality.resize(ntets);
        for (auto& q : e.tets.quality) q = r.f64();
        e.tets.projection_only = r.u8() != 0;
        e.grid.bounds.lo = r.vec3();
        e.grid.bounds.hi = r.vec3();
        for (auto& d : e.grid.dims) d = r.u32();
        e.grid.cells.resize(r.u32());
        for (auto& cell : e.grid.cells) {
            cell.resize(r.u32());
            for (auto& t : cell) t = r.u32();
        }
        e.usage.resize(ntets);
        for (auto& u : e.usage) u = r.u64();
        e.blacklist.resize(r.u32());
        for (auto& t : e.blacklist)
            for (auto& id : t.ids) id = r.u32();
    }
    return set;
}

}  // namespace lgi
