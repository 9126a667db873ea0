#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "lgi/error.hpp"
#include "lgi/library.hpp"
#include "lgi/obj_io.hpp"
#include "lgi/synth.hpp"

using namespace lgi;
using test::Rng;

namespace {

ShapeLibrary small_library() {
    SynthConfig cfg;
    cfg.nx = 16;
    cfg.ny = 12;
    cfg.shapes = 8;
    cfg.inbetweens = 2;
    cfg.bundles = 6;
    cfg.seed = 42;
    return generate_library(cfg).lib;
}

}  // namespace

TEST_CASE("jaw transform") {
    JawModel model;
    model.hinge_point = {5, 6, 0};
    model.hinge_axis = {1, 0, 0};
    model.slide_dir = {0, -1, 0};
    model.lateral_dir = {1, 0, 0};

    SUBCASE("zero pose is the identity") {
        const Affine t = jaw_transform(model, {0, 0, 0});
        const Vec3 p{1, 2, 3};
        CHECK((t.apply(p) - p).norm() < 1e-15);
    }

    SUBCASE("pure protrusion translates along the slide direction") {
        const Affine t = jaw_transform(model, {0, 5, 0});
        const Vec3 p{1, 2, 3};
        CHECK((t.apply(p) - (p + model.slide_dir * 5.0)).norm() < 1e-12);
    }

    SUBCASE("the hinge point is fixed under pure rotation") {
        const Affine t = jaw_transform(model, {0.3, 0, 0});
        CHECK((t.apply(model.hinge_point) - model.hinge_point).norm() < 1e-12);
    }

    SUBCASE("transform composed with its inverse is the identity") {
        Rng rng(3);
        for (int it = 0; it < 20; ++it) {
            const JawPose pose{rng.uniform(-0.5, 0.5), rng.uniform(-3, 3), rng.uniform(-3, 3)};
            const Affine t = jaw_transform(model, pose);
            const Affine round = t.compose(t.inverse());
            const Vec3 p = rng.vec3(-10, 10);
            CHECK((round.apply(p) - p).norm() < 1e-12);
        }
    }
}

TEST_CASE("skin positions") {
    auto lib = small_library();

    SUBCASE("zero pose leaves positions unchanged") {
        const auto out = skin_positions(lib, lib.neutral.positions, {0, 0, 0});
        for (int v = 0; v < lib.neutral.vertex_count(); ++v)
            CHECK((out[v] - lib.neutral.positions[v]).norm() == 0.0);
    }

    SUBCASE("full influence with pure translation moves every vertex") {
        auto full = lib;
        std::fill(full.skin_weights.begin(), full.skin_weights.end(), 1.0);
        const JawPose pose{0, 2.5, -1.0};
        const Vec3 t = full.jaw_model.slide_dir * 2.5 + full.jaw_model.lateral_dir * -1.0;
        const auto out = skin_positions(full, full.neutral.positions, pose);
        for (int v = 0; v < full.neutral.vertex_count(); ++v)
            CHECK((out[v] - (full.neutral.positions[v] + t)).norm() < 1e-12);
    }

    SUBCASE("matches a per-vertex brute-force blend") {
        Rng rng(5);
        const JawPose pose{0.25, 1.0, -0.5};
        const Affine jaw = jaw_transform(lib.jaw_model, pose);
        const auto out = skin_positions(lib, lib.neutral.positions, pose);
        for (int v = 0; v < lib.neutral.vertex_count(); ++v) {
            const double s = lib.skin_weights[v];
            const Vec3 p = lib.neutral.positions[v];
            const Vec3 expect = (jaw.linear * p + jaw.translation) * s + p * (1.0 - s);
            CHECK((out[v] - expect).norm() < 1e-12);
        }
    }
}

TEST_CASE("unskin shape") {
    auto lib = small_library();

    SUBCASE("zero jaw pose leaves the displacement unchanged") {
        Shape s;
        s.name = "flat";
        s.jaw = {0, 0, 0};
        s.disp.assign(lib.neutral.vertex_count(), Vec3{0.1, -0.2, 0.3});
        const auto unskinned = unskin_shape(lib, s);
        for (const auto& d : unskinned) CHECK((d - Vec3{0.1, -0.2, 0.3}).norm() < 1e-12);
    }

    SUBCASE("full influence with translation subtracts the translation") {
        auto full = lib;
        std::fill(full.skin_weights.begin(), full.skin_weights.end(), 1.0);
        Shape s;
        s.name = "slide";
        s.jaw = {0, 3.0, 0};
        const Vec3 t = full.jaw_model.slide_dir * 3.0;
        s.disp.assign(full.neutral.vertex_count(), Vec3{0.5, 0, 0});
        const auto unskinned = unskin_shape(full, s);
        for (const auto& d : unskinned) CHECK((d - (Vec3{0.5, 0, 0} - t)).norm() < 1e-12);
    }

    SUBCASE("re-skinning reproduces every library shape") {
        const double tol = 1e-9 * lib.bbox_diag;
        for (const auto& shape : lib.shapes) {
            std::vector<Vec3> posed(lib.neutral.positions);
            for (int v = 0; v < lib.neutral.vertex_count(); ++v)
                posed[v] += shape.disp_unskinned[v];
            const auto reskinned = skin_positions(lib, posed, shape.jaw);
            for (int v = 0; v < lib.neutral.vertex_count(); ++v)
                CHECK((reskinned[v] - (lib.neutral.positions[v] + shape.disp[v])).norm() < tol);
        }
    }
}

TEST_CASE("bundle evaluation") {
    auto lib = small_library();

    SUBCASE("single-shape weight reproduces the shape's surface point") {
        const Shape& s = lib.shapes[0];
        for (const auto& b : lib.bundles) {
            const Vec3 p = eval_bundle(lib, b, {{s.name, 1.0}}, s.jaw);
            std::vector<Vec3> posed(lib.neutral.positions);
            for (int v = 0; v < lib.neutral.vertex_count(); ++v) posed[v] += s.disp[v];
            const Vec3 expect = eval_surface_point(posed, lib.neutral, b.attach);
            CHECK((p - expect).norm() < 1e-9 * lib.bbox_diag);
        }
    }

    SUBCASE("empty weights give the rest position") {
        for (const auto& b : lib.bundles) {
            const Vec3 p = eval_bundle(lib, b, {}, {0, 0, 0});
            CHECK((p - bundle_rest_position(lib, b)).norm() < 1e-15);
        }
    }

    SUBCASE("uniform weights average the unskinned bundle points") {
        const auto& b = lib.bundles[0];
        std::map<std::string, double> weights;
        Vec3 expect;
        for (int s = 0; s < 4; ++s) {
            weights[lib.shapes[s].name] = 0.25;
            const Vec3 ps = eval_bundle(lib, b, {{lib.shapes[s].name, 1.0}}, {0, 0, 0});
            expect += ps * 0.25;
        }
        const Vec3 p = eval_bundle(lib, b, weights, {0, 0, 0});
        CHECK((p - expect).norm() < 1e-10 * lib.bbox_diag);
    }

    SUBCASE("evaluation is affine in the weights at fixed pose") {
        Rng rng(9);
        const auto& b = lib.bundles[1];
        const JawPose pose{0.2, 0.5, 0.0};
        for (int it = 0; it < 20; ++it) {
            auto rand_weights = [&]() {
                std::map<std::string, double> w;
                double sum = 0.0;
                for (int s = 0; s < 3; ++s) {
                    const double x = rng.uniform(0.05, 1.0);
                    w[lib.shapes[rng.below(static_cast<int>(lib.shapes.size()))].name] += x;
                    sum += x;
                }
                for (auto& [k, v] : w) v /= sum;
                return w;
            };
            const auto w1 = rand_weights(), w2 = rand_weights();
            const double alpha = rng.uniform();
            std::map<std::string, double> mix;
            for (const auto& [k, v] : w1) mix[k] += alpha * v;
            for (const auto& [k, v] : w2) mix[k] += (1.0 - alpha) * v;
            const Vec3 lhs = eval_bundle(lib, b, mix, pose);
            const Vec3 rhs = eval_bundle(lib, b, w1, pose) * alpha +
                             eval_bundle(lib, b, w2, pose) * (1.0 - alpha);
            CHECK((lhs - rhs).norm() < 1e-10 * lib.bbox_diag);
        }
    }

    SUBCASE("unknown shape name throws") {
        CHECK_THROWS_AS(eval_bundle(lib, lib.bundles[0], {{"nope", 1.0}}, {0, 0, 0}), Error);
    }
}

TEST_CASE("library manifest loading") {
    test::TempDir dir("library");

    SUBCASE("neutral-only manifest yields a valid empty library") {
        auto mesh = test::make_grid_mesh(6, 6);
        save_obj(mesh, dir.file("neutral.obj"));
        std::ofstream out(dir.file("manifest.json"));
        out << R"({"neutral": "neutral.obj"})";
        out.close();
        const auto lib = load_library(dir.file("manifest.json"));
        CHECK(lib.shapes.empty());
        CHECK(lib.bundles.empty());
        CHECK(lib.bbox_diag > 0.0);
    }

    SUBCASE("shape with mismatched topology names the offender") {
        auto mesh = test::make_grid_mesh(6, 6);
        save_obj(mesh, dir.file("neutral.obj"));
        auto other = test::make_grid_mesh(5, 5);
        save_obj(other, dir.file("bad.obj"));
        std::ofstream out(dir.file("manifest.json"));
        out << R"({"neutral": "neutral.obj",
                   "shapes": [{"name": "bad", "path": "bad.obj", "jaw": {"rot": 0}}]})";
        out.close();
        try {
            load_library(dir.file("manifest.json"));
            FAIL("expected a topology error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("bad") != std::string::npos);
            CHECK(std::string(e.what()).find("topology") != std::string::npos);
        }
    }

    SUBCASE("missing jaw pose is rejected") {
        auto mesh = test::make_grid_mesh(6, 6);
        save_obj(mesh, dir.file("neutral.obj"));
        save_obj(mesh, dir.file("s.obj"));
        std::ofstream out(dir.file("manifest.json"));
        out << R"({"neutral": "neutral.obj", "shapes": [{"name": "s", "path": "s.obj"}]})";
        out.close();
        CHECK_THROWS_AS(load_library(dir.file("manifest.json")), ValidationError);
    }

    SUBCASE("generated library round-trips through the manifest") {
        SynthConfig cfg;
        cfg.nx = 16;
        cfg.ny = 12;
        cfg.shapes = 6;
        cfg.inbetweens = 2;
        cfg.bundles = 6;
        cfg.seed = 3;
        const auto synth = generate_library(cfg);
        write_library(synth, dir.path.string());
        const auto lib = load_library(dir.file("manifest.json"));
        CHECK(lib.shapes.size() == synth.lib.shapes.size());
        CHECK(lib.bundles.size() == synth.lib.bundles.size());
        // Unskinned fields recomputed at load match the generator's up to the
        // OBJ files' 9-significant-digit printed precision.
        const double quantum = 2e-8 * lib.bbox_diag;
        for (size_t s = 0; s < lib.shapes.size(); ++s)
            for (int v = 0; v < lib.neutral.vertex_count(); ++v)
                CHECK((lib.shapes[s].disp_unskinned[v] - synth.info[s].expression[v]).norm() <
                      quantum);
    }

    SUBCASE("duplicate shape names are rejected") {
        auto mesh = test::make_grid_mesh(6, 6);
        save_obj(mesh, dir.file("neutral.obj"));
        save_obj(mesh, dir.file("s.obj"));
        std::ofstream out(dir.file("manifest.json"));
        out << R"({"neutral": "neutral.obj",
                   "shapes": [{"name": "s", "path": "s.obj", "jaw": {"rot": 0}},
                              {"name": "s", "path": "s.obj", "jaw": {"rot": 0}}]})";
        out.close();
        CHECK_THROWS_AS(load_library(dir.file("manifest.json")), ValidationError);
    }
}
