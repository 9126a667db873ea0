#include "lgi/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lgi/error.hpp"

namespace lgi {

namespace {

// Parses "v", "v/vt", "v//vn" or "v/vt/vn"; returns (v, vt) as 1-based
// indices, vt == 0 when absent.
std::pair<long, long> parse_face_corner(const std::string& token, const std::string& path,
                                        int line) {
    long v = 0, vt = 0;
    size_t pos = 0;
    try {
        v = std::stol(token, &pos);
    } catch (const std::exception&) {
        throw ParseError(path, line, "bad face corner '" + token + "'");
    }
    if (v < 0) throw ParseError(path, line, "negative OBJ indices are not supported");
    if (pos < token.size()) {
        if (token[pos] != '/') throw ParseError(path, line, "bad face corner '" + token + "'");
        const size_t rest = pos + 1;
        if (rest < token.size() && token[rest] != '/') {
            size_t used = 0;
            try {
                vt = std::stol(token.substr(rest), &used);
            } catch (const std::exception&) {
                throw ParseError(path, line, "bad face corner '" + token + "'");
            }
            if (vt < 0) throw ParseError(path, line, "negative OBJ indices are not supported");
        }
    }
    return {v, vt};
}

}  // namespace

TriMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open OBJ file: " + path);

    TriMesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;

        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x >> p.y >> p.z))
                throw ParseError(path, line_no, "malformed vertex record");
            mesh.positions.push_back(p);
        } else if (tag == "vt") {
            Vec2 uv;
            if (!(ss >> uv.x >> uv.y))
                throw ParseError(path, line_no, "malformed texture coordinate record");
            mesh.uvs.push_back(uv);
        } else if (tag == "f") {
            std::vector<std::pair<long, long>> corners;
            std::string token;
            while (ss >> token) corners.push_back(parse_face_corner(token, path, line_no));
            if (corners.size() != 3)
                throw ParseError(path, line_no,
                                 "face has " + std::to_string(corners.size()) +
                                     " corners; only triangles are supported");
            std::array<int, 3> tri{};
            for (int i = 0; i < 3; ++i) {
                const auto [v, vt] = corners[i];
                if (v < 1 || v > static_cast<long>(mesh.positions.size()))
                    throw ParseError(path, line_no, "vertex index out of range");
                if (vt != 0 && vt != v)
                    throw ParseError(path, line_no,
                                     "vertex " + std::to_string(v) + " uses texture coordinate " +
                                         std::to_string(vt) +
                                         "; per-corner UVs / multi-chart meshes are not supported");
                tri[i] = static_cast<int>(v - 1);
            }
            mesh.faces.push_back(tri);
        }
        // other record types (vn, o, g, s, mtllib, usemtl) are ignored
    }

    if (mesh.uvs.size() != mesh.positions.size())
        throw ValidationError(path + ": expected one vt per vertex (got " +
                              std::to_string(mesh.uvs.size()) + " vt for " +
                              std::to_string(mesh.positions.size()) + " vertices)");
    return mesh;
}

void save_obj(const TriMesh& mesh, std::span<const Vec3> positions, const std::string& path) {
    if (positions.size() != mesh.positions.size())
        throw Error("save_obj: position count does not match mesh");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot open file for writing: " + path);
    for (const Vec3& p : positions) std::fprintf(f, "v %.9g %.9g %.9g\n", p.x, p.y, p.z);
    for (const Vec2& uv : mesh.uvs) std::fprintf(f, "vt %.9g %.9g\n", uv.x, uv.y);
    for (const auto& tri : mesh.faces)
        std::fprintf(f, "f %d/%d %d/%d %d/%d\n", tri[0] + 1, tri[0] + 1, tri[1] + 1, tri[1] + 1,
                     tri[2] + 1, tri[2] + 1);
    std::fclose(f);
}

}  // namespace lgi
