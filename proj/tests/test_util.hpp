#pragma once

#include <gtest/gtest.h>

#include <random>

#include "car/program.hpp"
#include "oracles.hpp"

namespace testutil {

using namespace car;
using oracle::fixture;
using oracle::TempDir;

/// Valid program exercising every statement kind. Objects may overlap; the
/// generator only guarantees that validate() accepts the result.
inline SceneProgram random_program(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto pos = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    auto yaw = [&] { return normalize_yaw(pos(-4.0, 4.0)); };

    SceneProgram p;
    p.shell = rectangular_shell(pos(3.0, 8.0), pos(3.0, 8.0), pos(2.4, 3.2));
    if (u(rng) < 0.7) p.shell.cutouts.push_back({"door_0", CutoutKind::door, "wall_south", 0.8, 0.9, 2.0, 0.0});
    if (u(rng) < 0.7) p.shell.cutouts.push_back({"window_0", CutoutKind::window, "wall_east", 1.2, 1.0, 1.1, 0.9});

    std::vector<std::string> objects;
    std::vector<std::pair<std::string, std::string>> parts;  // (object, part)
    const int n = 2 + static_cast<int>(u(rng) * 6.0);
    for (int i = 0; i < n; ++i) {
        const std::string id = "obj_" + std::to_string(i);
        const Pose pose{{pos(0.5, p.shell.width - 0.5), pos(0.5, p.shell.depth - 0.5), 0.0}, yaw()};
        const double kind = u(rng);
        if (kind < 0.45) {
            p.statements.push_back(Proxy{id, "box", pose, {pos(0.2, 2.0), pos(0.2, 2.0), pos(0.1, 2.0)}, std::nullopt,
                                         PlacementType::floor});
        } else if (kind < 0.85) {
            Assembly a{id, "table", pose, {}, std::nullopt, PlacementType::floor};
            const double w = pos(0.6, 1.8), d = pos(0.4, 1.2), h = pos(0.4, 1.0);
            a.parts.push_back({"top", Primitive::box, {w, d, 0.04}, {0.0, 0.0, h - 0.02}, {}});
            a.parts.push_back({"leg", Primitive::cylinder, {0.05, 0.05, h - 0.04}, {w / 2 - 0.05, d / 2 - 0.05, (h - 0.04) / 2}, {}});
            if (u(rng) < 0.5) a.parts.push_back({"knob", Primitive::sphere, {0.04, 0.04, 0.04}, {0.0, 0.0, h + 0.02}, {}});
            for (const auto& part : a.parts) parts.push_back({id, part.name});
            p.statements.push_back(std::move(a));
        } else {
            AssetInstance ai{id, "lamp", "lamp_01", "assets/meshes/lamp_01.obj", pose, {0.3, 0.3, 0.6},
                             {pos(0.5, 1.5), pos(0.5, 1.5), pos(0.5, 1.5)}, std::nullopt, PlacementType::floor};
            p.statements.push_back(std::move(ai));
        }
        objects.push_back(id);
    }
    // A few surface children of earlier objects.
    const int kids = static_cast<int>(u(rng) * 3.0);
    for (int k = 0; k < kids; ++k) {
        const std::string parent = objects[static_cast<std::size_t>(rng() % objects.size())];
        const auto& pp = object_pose(*find_object(p, parent));
        const std::string id = "item_" + std::to_string(k);
        p.statements.push_back(Proxy{id, "cup", {{pp.position.x, pp.position.y, 0.75}, pp.yaw}, {0.08, 0.08, 0.1},
                                     parent, PlacementType::surface});
        objects.push_back(id);
    }
    // Appearance statements.
    for (const auto& id : objects)
        if (u(rng) < 0.6)
            p.statements.push_back(MaterialAssign{id, {"wood", {u(rng), u(rng), u(rng)}, u(rng), u(rng), 0.5},
                                                  ShaderOverride::none, std::nullopt});
    for (const auto& [obj, part] : parts)
        if (u(rng) < 0.3)
            p.statements.push_back(MaterialAssign{obj + "/" + part, {"metal", {u(rng), u(rng), u(rng)}, u(rng), 1.0, 0.5},
                                                  ShaderOverride::none, std::nullopt});
    p.statements.push_back(MaterialAssign{"shell/floor", {"wood", {0.5, 0.4, 0.3}, 0.6, 0.0, 0.5}, ShaderOverride::none,
                                          ImageNode{"textures/oak.png", {"planar", {2.0, 2.0}, 0.0}}});
    if (u(rng) < 0.5) p.statements.push_back(TextureBind{objects.front(), "textures/fabric.png", {}, false});
    p.statements.push_back(Light{"sun", LightKind::sun, {0.0, 0.0, 5.0}, {0.3, 0.2, -1.0}, pos(1.0, 5.0), {1.0, 0.95, 0.9}, 0.0});
    if (u(rng) < 0.5)
        p.statements.push_back(Light{"lamp_light", LightKind::point, {1.0, 1.0, 2.0}, {0.0, 0.0, -1.0}, 100.0, {1, 1, 1}, 0.1});
    if (u(rng) < 0.7) {
        Camera c;
        c.pose = {{p.shell.width / 2, p.shell.depth / 2, 6.0}, 0.0};
        c.scale_or_fov = std::max(p.shell.width, p.shell.depth) * 1.1;
        p.statements.push_back(c);
    }
    if (u(rng) < 0.5) p.statements.push_back(RenderSettings{800, 600, 16, 0.4});
    validate(p);
    return p;
}

inline Proxy box(std::string id, Vec2 xy, Vec3 size, double yaw = 0.0) {
    Proxy b;
    b.id = std::move(id);
    b.category = "box";
    b.size = size;
    b.pose = {{xy.x, xy.y, 0.0}, yaw};
    return b;
}

inline std::string cli() { return CAR_CLI; }

/// Runs a shell command, returning its exit status.
inline int shell(const std::string& cmd) {
    const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace testutil
