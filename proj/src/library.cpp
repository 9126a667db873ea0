#include "lgi/library.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lgi/error.hpp"
#include "lgi/obj_io.hpp"

namespace lgi {

namespace {

constexpr double kBlendDetWarn = 1e-6;
constexpr double kBlendDetFloor = 1e-9;

Vec3 parse_vec3(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3)
        throw ValidationError(what + " must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec3 parse_unit(const nlohmann::json& j, const std::string& what) {
    Vec3 v = parse_vec3(j, what);
    const double n = v.norm();
    if (std::abs(n - 1.0) > 1e-3)
        throw ValidationError(what + " must be unit length (|v| = " + std::to_string(n) + ")");
    return v / n;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<BundleDef> load_bundle_csv(const std::string& path, const TriMesh& neutral) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open bundle file: " + path);
    std::vector<BundleDef> bundles;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (line_no == 1 && t.rfind("name,", 0) == 0) continue;  // header
        auto cols = split(t, ',');
        if (cols.size() != 6)
            throw ParseError(path, line_no, "expected name,face,b0,b1,b2,tags");
        BundleDef b;
        b.name = trim(cols[0]);
        if (b.name.empty()) throw ParseError(path, line_no, "empty bundle name");
        try {
            b.attach.face = std::stoi(cols[1]);
            for (int i = 0; i < 3; ++i) b.attach.bary[i] = std::stod(cols[2 + i]);
        } catch (const std::exception&) {
            throw ParseError(path, line_no, "malformed numeric field");
        }
        for (const auto& tag : split(trim(cols[5]), ';'))
            if (!trim(tag).empty()) b.region_tags.insert(trim(tag));
        if (!surface_point_valid(neutral, b.attach))
            throw ParseError(path, line_no, "bundle '" + b.name +
                                                "' attach point is invalid on the neutral mesh");
        bundles.push_back(std::move(b));
    }
    return bundles;
}

std::vector<double> load_skin_weights(const std::string& path, int vertex_count) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open skin weight file: " + path);
    std::vector<double> w;
    double v;
    while (in >> v) w.push_back(v);
    if (static_cast<int>(w.size()) != vertex_count)
        throw ValidationError("skin weight file has " + std::to_string(w.size()) +
                              " entries for " + std::to_string(vertex_count) + " vertices");
    for (size_t i = 0; i < w.size(); ++i)
        if (w[i] < 0.0 || w[i] > 1.0)
            throw ValidationError("skin weight " + std::to_string(i) + " = " +
                                  std::to_string(w[i]) + " outside [0,1]");
    return w;
}

}  // namespace

const Shape* ShapeLibrary::find_shape(const std::string& name) const {
    for (const auto& s : shapes)
        if (s.name == name) return &s;
    return nullptr;
}

const BundleDef* ShapeLibrary::find_bundle(const std::string& name) const {
    for (const auto& b : bundles)
        if (b.name == name) return &b;
    return nullptr;
}

int ShapeLibrary::shape_index(const std::string& name) const {
    for (size_t i = 0; i < shapes.size(); ++i)
        if (shapes[i].name == name) return static_cast<int>(i);
    return -1;
}

Affine jaw_transform(const JawModel& model, const JawPose& pose) {
    const Mat3 rot = Mat3::axis_angle(model.hinge_axis, pose.rot);
    const Vec3 slide = model.slide_dir * pose.protrude + model.lateral_dir * pose.lateral;
    // rotate about hinge_point, then translate
    return {rot, model.hinge_point - rot * model.hinge_point + slide};
}

Affine blended_vertex_transform(const ShapeLibrary& lib, int vertex, const JawPose& pose) {
    const double s = lib.skin_weights[vertex];
    if (s == 0.0) return Affine::identity();
    const Affine jaw = jaw_transform(lib.jaw_model, pose);
    if (s == 1.0) return jaw;
    return Affine::blend(1.0 - s, Affine::identity(), s, jaw);
}

Affine blended_surface_transform(const ShapeLibrary& lib, const SurfacePoint& sp,
                                 const JawPose& pose) {
    const auto& tri = lib.neutral.faces.at(sp.face);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += sp.bary[i] * lib.skin_weights[tri[i]];
    if (s == 0.0) return Affine::identity();
    const Affine jaw = jaw_transform(lib.jaw_model, pose);
    if (s == 1.0) return jaw;
    return Affine::blend(1.0 - s, Affine::identity(), s, jaw);
}

std::vector<Vec3> skin_positions(const ShapeLibrary& lib, std::span<const Vec3> positions,
                                 const JawPose& pose) {
    const int nv = lib.neutral.vertex_count();
    if (static_cast<int>(positions.size()) != nv)
        throw Error("skin_positions: position count does not match library vertex count");
    const Affine jaw = jaw_transform(lib.jaw_model, pose);
    std::vector<Vec3> out(nv);
    int warned = 0;
    for (int v = 0; v < nv; ++v) {
        const double s = lib.skin_weights[v];
        if (s == 0.0) {
            out[v] = positions[v];
            continue;
        }
        const Affine m = (s == 1.0) ? jaw : Affine::blend(1.0 - s, Affine::identity(), s, jaw);
        if (std::abs(m.linear.det()) < kBlendDetWarn && warned++ == 0)
            std::fprintf(stderr, "warning: blended skin transform near-singular at vertex %d\n", v);
        out[v] = m.apply(positions[v]);
    }
    return out;
}

std::vector<Vec3> unskin_shape(const ShapeLibrary& lib, const Shape& shape) {
    const int nv = lib.neutral.vertex_count();
    std::vector<Vec3> out(nv);
    const Affine jaw = jaw_transform(lib.jaw_model, shape.jaw);
    for (int v = 0; v < nv; ++v) {
        const double s = lib.skin_weights[v];
        const Vec3 posed = lib.neutral.positions[v] + shape.disp[v];
        if (s == 0.0) {
            out[v] = shape.disp[v];
            continue;
        }
        const Affine m = (s == 1.0) ? jaw : Affine::blend(1.0 - s, Affine::identity(), s, jaw);
        if (std::abs(m.linear.det()) < kBlendDetFloor)
            throw Error("unskin_shape: non-invertible blended transform at vertex " +
                        std::to_string(v) + " in shape '" + shape.name + "'");
        out[v] = m.inverse().apply(posed) - lib.neutral.positions[v];
    }
    return out;
}

Vec3 eval_bundle(const ShapeLibrary& lib, const BundleDef& bundle,
                 const std::map<std::string, double>& weights, const JawPose& pose) {
    if (!weights.empty()) {
        double sum = 0.0;
        for (const auto& [name, w] : weights) {
            if (w < -1e-9)
                throw Error("eval_bundle: negative weight for '" + name + "'");
            if (name != kNeutralName && lib.shape_index(name) < 0)
                throw Error("eval_bundle: unknown shape '" + name + "'");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw Error("eval_bundle: weights sum to " + std::to_string(sum));
    }
    const auto& tri = lib.neutral.faces.at(bundle.attach.face);
    Vec3 result;
    for (int i = 0; i < 3; ++i) {
        const int v = tri[i];
        Vec3 p = lib.neutral.positions[v];
        for (const auto& [name, w] : weights) {
            if (name == kNeutralName) continue;
            p += lib.shapes[lib.shape_index(name)].disp_unskinned[v] * w;
        }
        result += blended_vertex_transform(lib, v, pose).apply(p) * bundle.attach.bary[i];
    }
    return result;
}

Vec3 bundle_rest_position(const ShapeLibrary& lib, const BundleDef& bundle) {
    return eval_surface_point(lib.neutral.positions, lib.neutral, bundle.attach);
}

void ShapeLibrary::finalize() {
    validate_mesh(neutral);
    bbox_diag = neutral.bbox_diagonal();
    if (static_cast<int>(skin_weights.size()) != neutral.vertex_count())
        throw ValidationError("skin weight count does not match the neutral mesh");

    std::set<std::string> names;
    for (auto& s : shapes) {
        if (s.name == kNeutralName)
            throw ValidationError("shape name 'neutral' is reserved");
        if (!names.insert(s.name).second)
            throw ValidationError("duplicate shape name '" + s.name + "'");
        if (static_cast<int>(s.disp.size()) != neutral.vertex_count())
            throw ValidationError("shape '" + s.name + "' displacement count mismatch");
        if (std::abs(s.jaw.rot) >= M_PI / 2)
            throw ValidationError("shape '" + s.name + "' jaw rotation outside (-pi/2, pi/2)");
        if (s.disp_unskinned.empty()) s.disp_unskinned = unskin_shape(*this, s);

        // Re-skinning the factored shape must reproduce the original.
        std::vector<Vec3> posed(neutral.vertex_count());
        for (int v = 0; v < neutral.vertex_count(); ++v)
            posed[v] = neutral.positions[v] + s.disp_unskinned[v];
        const auto reskinned = skin_positions(*this, posed, s.jaw);
        const double tol = 1e-9 * bbox_diag;
        for (int v = 0; v < neutral.vertex_count(); ++v) {
            const Vec3 expect = neutral.positions[v] + s.disp[v];
            if ((reskinned[v] - expect).norm() > tol)
                throw ValidationError("shape '" + s.name +
                                      "' fails the unskin/skin identity at vertex " +
                                      std::to_string(v));
        }
    }

    std::set<std::string> bnames;
    for (const auto& b : bundles) {
        if (!bnames.insert(b.name).second)
            throw ValidationError("duplicate bundle name '" + b.name + "'");
        if (!surface_point_valid(neutral, b.attach))
            throw ValidationError("bundle '" + b.name + "' attach point invalid");
    }
}

ShapeLibrary load_library(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ValidationError("cannot open manifest: " + manifest_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest parse error: " + std::string(e.what()));
    }
    const auto dir = std::filesystem::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) { return (dir / p).string(); };

    ShapeLibrary lib;
    if (!j.contains("neutral")) throw ValidationError("manifest missing 'neutral'");
    lib.neutral = load_obj(resolve(j["neutral"].get<std::string>()));

    if (j.contains("jaw_model")) {
        const auto& jm = j["jaw_model"];
        lib.jaw_model.hinge_point = parse_vec3(jm.at("hinge_point"), "jaw hinge_point");
        lib.jaw_model.hinge_axis = parse_unit(jm.at("hinge_axis"), "jaw hinge_axis");
        lib.jaw_model.slide_dir = parse_unit(jm.at("slide_dir"), "jaw slide_dir");
        lib.jaw_model.lateral_dir = parse_unit(jm.at("lateral_dir"), "jaw lateral_dir");
    }

    if (j.contains("skin_weights")) {
        lib.skin_weights =
            load_skin_weights(resolve(j["skin_weights"].get<std::string>()),
                              lib.neutral.vertex_count());
    } else {
        lib.skin_weights.assign(lib.neutral.vertex_count(), 0.0);
    }

    if (j.contains("bundles"))
        lib.bundles = load_bundle_csv(resolve(j["bundles"].get<std::string>()), lib.neutral);

    for (const auto& js : j.value("shapes", nlohmann::json::array())) {
        Shape s;
        s.name = js.at("name").get<std::string>();
        if (!js.contains("jaw"))
            throw ValidationError("shape '" + s.name + "' is missing its jaw pose");
        s.jaw.rot = js["jaw"].value("rot", 0.0);
        s.jaw.protrude = js["jaw"].value("protrude", 0.0);
        s.jaw.lateral = js["jaw"].value("lateral", 0.0);
        for (const auto& t : js.value("tags", nlohmann::json::array()))
            s.tags.insert(t.get<std::string>());

        const TriMesh posed = load_obj(resolve(js.at("path").get<std::string>()));
        if (posed.vertex_count() != lib.neutral.vertex_count() ||
            posed.faces != lib.neutral.faces)
            throw ValidationError("shape '" + s.name + "' topology does not match the neutral");
        s.disp.resize(posed.vertex_count());
        for (int v = 0; v < posed.vertex_count(); ++v)
            s.disp[v] = posed.positions[v] - lib.neutral.positions[v];
        lib.shapes.push_back(std::move(s));
    }

    lib.finalize();
    return lib;
}

}  // namespace lgi
