#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "lgi/mesh.hpp"

namespace test {

using lgi::Vec2;
using lgi::Vec3;

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(uint64_t seed) : gen(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen);
    }
    Vec3 vec3(double lo = -1.0, double hi = 1.0) {
        return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)};
    }
    int below(int n) { return static_cast<int>(gen() % static_cast<uint64_t>(n)); }
};

// Two-triangle unit quad in the XY plane with matching UVs.
inline lgi::TriMesh make_quad_mesh(double scale = 1.0) {
    lgi::TriMesh m;
    m.positions = {{0, 0, 0}, {scale, 0, 0}, {scale, scale, 0}, {0, scale, 0}};
    m.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

// Planar vertex grid (nx x ny) over [0,1]^2 with UVs equal to position.
inline lgi::TriMesh make_grid_mesh(int nx, int ny, double scale = 1.0) {
    lgi::TriMesh m;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double u = static_cast<double>(i) / (nx - 1);
            const double v = static_cast<double>(j) / (ny - 1);
            m.positions.push_back({u * scale, v * scale, 0.0});
            m.uvs.push_back({u, v});
        }
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            const int v00 = j * nx + i, v10 = v00 + 1, v01 = v00 + nx, v11 = v01 + 1;
            m.faces.push_back({v00, v10, v11});
            m.faces.push_back({v00, v11, v01});
        }
    return m;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / ("lgi_test_" + name);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace test
