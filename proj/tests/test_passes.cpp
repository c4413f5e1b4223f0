#include "car/passes.hpp"

#include "test_util.hpp"

using namespace testutil;

namespace {

// Geometry oracle: the object statements themselves plus the shell.
std::pair<RoomShell, std::vector<Statement>> geometry_of(const SceneProgram& p) {
    std::vector<Statement> objs;
    for (const auto& s : p.statements)
        if (is_object(s)) objs.push_back(s);
    return {p.shell, objs};
}

std::vector<MaterialAssign> random_materials(const SceneProgram& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<MaterialAssign> out;
    for (const auto* s : objects_of(p)) {
        if (u(rng) < 0.5) continue;
        out.push_back({*object_id(*s), {u(rng) < 0.3 ? "glass" : "fabric", {u(rng), u(rng), u(rng)}, u(rng), 0.0, 0.5},
                       ShaderOverride::none, std::nullopt});
        if (const auto* a = std::get_if<Assembly>(s); a && u(rng) < 0.5)
            out.push_back({a->id + "/" + a->parts.front().name, {"metal", {0.5, 0.5, 0.5}, 0.3, 1.0, 0.5},
                           ShaderOverride::none, std::nullopt});
    }
    out.push_back({"shell/walls", {"paint", {0.9, 0.9, 0.85}, 0.8, 0.0, 0.5}, ShaderOverride::none, std::nullopt});
    return out;
}

}  // namespace

TEST(Passes, AppearancePassesPreserveGeometry) {
    std::mt19937_64 rng(99);
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const SceneProgram p = random_program(seed);
        const auto before = geometry_of(p);
        const auto hash = geometry_hash(p);

        const PassResult m = apply_materials(p, random_materials(p, rng));
        ASSERT_EQ(geometry_of(m.program), before) << "materials, seed " << seed;
        ASSERT_EQ(geometry_hash(m.program), hash);

        std::vector<TextureBind> binds;
        for (const auto* s : objects_of(p)) binds.push_back({*object_id(*s), "textures/missing_" + *object_id(*s) + ".png", {}, false});
        const PassResult t = apply_textures(m.program, binds);
        ASSERT_EQ(geometry_of(t.program), before) << "textures, seed " << seed;
        EXPECT_EQ(t.warnings.size(), binds.size());  // every texture is missing

        LightingPlan plan;
        plan.artificial.push_back({LightKind::point, {1.0, 1.0, 2.2}, 80.0, {1, 1, 1}});
        for (const auto& c : p.shell.cutouts)
            if (c.kind == CutoutKind::window) plan.windows.push_back(c.id);
        const SceneProgram r = render_setup(t.program, plan);
        ASSERT_EQ(geometry_of(r), before) << "render, seed " << seed;
        ASSERT_EQ(geometry_hash(r), hash);
        validate(r);
    }
}

TEST(Passes, MaterialsLastWriterWins) {
    const SceneProgram p = random_program(4);
    MaterialAssign a{"obj_0", {"wood", {0.1, 0.1, 0.1}, 0.5, 0.0, 0.5}, ShaderOverride::none, std::nullopt};
    MaterialAssign b = a;
    b.spec.base_color = {0.9, 0.2, 0.2};
    const PassResult r = apply_materials(p, {a, b});
    EXPECT_EQ(r.warnings.size(), 1u);
    int count = 0;
    for (const auto& s : r.program.statements)
        if (auto* m = std::get_if<MaterialAssign>(&s); m && m->target == "obj_0") {
            ++count;
            EXPECT_EQ(m->spec.base_color, b.spec.base_color);
        }
    EXPECT_EQ(count, 1);
    EXPECT_THROW(apply_materials(p, {{"ghost", {}, ShaderOverride::none, std::nullopt}}), LinkError);
}

TEST(Passes, GlassGetsOverride) {
    const SceneProgram p = random_program(4);
    const PassResult r = apply_materials(p, {{"obj_0", {"glass", {0.9, 0.9, 0.9}, 0.0, 0.0, 0.5}, ShaderOverride::none, std::nullopt}});
    const auto idx = std::find_if(r.program.statements.begin(), r.program.statements.end(), [](const Statement& s) {
        auto* m = std::get_if<MaterialAssign>(&s);
        return m && m->target == "obj_0";
    });
    ASSERT_NE(idx, r.program.statements.end());
    EXPECT_EQ(std::get<MaterialAssign>(*idx).shader_override, ShaderOverride::glass);
}

TEST(Passes, ReplaceKeepsPoseAndIdentity) {
    SceneProgram p;
    p.shell = rectangular_shell(5, 4);
    p.statements.push_back(box("desk", {2.0, 1.0}, {1.2, 0.6, 0.75}, 0.4));
    p.statements.push_back(box("bin", {4.0, 3.0}, {0.3, 0.3, 0.4}));
    const std::vector<Part> parts = {{"top", Primitive::box, {1.2, 0.6, 0.04}, {0, 0, 0.73}, {}},
                                     {"leg", Primitive::box, {0.05, 0.05, 0.71}, {0.5, 0.25, 0.355}, {}}};
    const auto [out, dict] = replace_with_parts(p, {{"desk", parts}});
    const auto& a = std::get<Assembly>(*find_object(const_cast<SceneProgram&>(out), "desk"));
    EXPECT_EQ(a.pose, std::get<Proxy>(p.statements[0]).pose);
    EXPECT_EQ(a.category, "box");
    EXPECT_EQ(a.parts, parts);
    EXPECT_EQ(out.statements[1], p.statements[1]);
    EXPECT_EQ(dict.at("desk"), parts);
    EXPECT_THROW(replace_with_parts(p, {{"nope", parts}}), LinkError);
}

TEST(Passes, AppendSnapsWallItemsFlush) {
    SceneProgram p;
    p.shell = rectangular_shell(4, 3);
    const PlacedItem art{"art", "painting", {{2.0, 2.6, 1.5}, 0.0}, {0.8, 0.04, 0.6}, std::nullopt, PlacementType::wall};
    const SceneProgram out = append_objects(p, {art}, {});
    const auto& px = std::get<Proxy>(out.statements.back());
    EXPECT_EQ(px.placement_type, PlacementType::wall);
    // Back face on the north wall (y = 3), facing into the room.
    EXPECT_NEAR(px.pose.position.y + px.size.y / 2, 3.0, 1e-9);
    EXPECT_NEAR(facing(px.pose.yaw).y, -1.0, 1e-9);
    EXPECT_THROW(append_objects(out, {art}, {}), ConflictError);
}
