#include "car/solver.hpp"

#include "test_util.hpp"

using namespace testutil;

TEST(Corrector, SoundAndOptimalOnRandomScenes) {
    const CorrectionConfig cfg;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const SceneProgram in = oracle::violating_scene(seed);
        const auto [out, report] = correct_placements(in, cfg);
        const auto check = oracle::check_correction(in, out, report, cfg);
        EXPECT_TRUE(check.sound) << "seed " << seed << ": " << check.detail;
        EXPECT_TRUE(check.optimal) << "seed " << seed << ": " << check.detail;
    }
}

TEST(Corrector, Idempotent) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto [once, r1] = correct_placements(oracle::violating_scene(seed));
        const auto [twice, r2] = correct_placements(once);
        EXPECT_TRUE(r2.entries.empty()) << "seed " << seed;
        EXPECT_TRUE(r2.unresolved.empty() || r2.unresolved == r1.unresolved) << "seed " << seed;
        EXPECT_EQ(twice, once) << "seed " << seed;
    }
}

TEST(Corrector, ValidSceneUntouched) {
    SceneProgram p;
    p.shell = rectangular_shell(4, 4);
    p.statements.push_back(box("a", {1, 1}, {1, 1, 1}));
    p.statements.push_back(box("b", {3, 3}, {1, 1, 1}, 0.7));
    const auto [out, report] = correct_placements(p);
    EXPECT_TRUE(report.empty());
    EXPECT_EQ(out, p);
}

TEST(Corrector, WallPushMovesToNearestInside) {
    SceneProgram p;
    p.shell = rectangular_shell(4, 4);
    p.statements.push_back(box("a", {0.2, 2.0}, {1, 1, 1}));
    const auto [out, report] = correct_placements(p);
    ASSERT_EQ(report.entries.size(), 1u);
    EXPECT_NEAR(object_pose(out.statements[0]).position.x, 0.5, 1e-9);
    EXPECT_NEAR(object_pose(out.statements[0]).position.y, 2.0, 1e-9);
    EXPECT_EQ(report.entries[0].kinds, std::vector<std::string>{"boundary"});
}

TEST(Corrector, LargerObjectStaysSmallerMoves) {
    SceneProgram p;
    p.shell = rectangular_shell(5, 5);
    p.statements.push_back(box("small", {2.4, 2.5}, {0.5, 0.5, 0.5}));
    p.statements.push_back(box("big", {2.0, 2.5}, {1.0, 1.0, 1.0}));
    const auto [out, report] = correct_placements(p);
    ASSERT_EQ(report.entries.size(), 1u);
    EXPECT_EQ(report.entries[0].id, "small");
    const Footprint a = footprint_of(*find_object(out, "small")), b = footprint_of(*find_object(out, "big"));
    EXPECT_LE(overlap_area(a, b), kOverlapEps);
    // Touching the big box's east face is the nearest grid point.
    EXPECT_NEAR(object_pose(*find_object(out, "small")).position.x, 2.75, 1e-9);
}

TEST(Corrector, ChildrenAreCarriedAndReseated) {
    SceneProgram p;
    p.shell = rectangular_shell(4, 4);
    p.statements.push_back(box("table", {0.3, 2.0}, {1.0, 1.0, 0.75}));
    Proxy cup = box("cup", {0.3, 2.0}, {0.1, 0.1, 0.1});
    cup.parent = "table";
    cup.placement_type = PlacementType::surface;
    cup.pose.position.z = 0.5;  // sunk into the table
    p.statements.push_back(cup);
    const auto [out, report] = correct_placements(p);
    const Pose& c = object_pose(*find_object(out, "cup"));
    EXPECT_NEAR(c.position.x, 0.5, 1e-9);
    EXPECT_NEAR(c.position.z, 0.75, 1e-9);
    const auto* e = report.find("cup");
    ASSERT_NE(e, nullptr);
    EXPECT_NE(std::find(e->kinds.begin(), e->kinds.end(), "carried"), e->kinds.end());
    EXPECT_NE(std::find(e->kinds.begin(), e->kinds.end(), "stacking"), e->kinds.end());
}

TEST(Corrector, FlatAndFixedObjectsNeverCollide) {
    SceneProgram p;
    p.shell = rectangular_shell(4, 4);
    p.statements.push_back(box("rug", {2, 2}, {2, 2, 0.01}));
    p.statements.push_back(box("bed", {2, 2}, {1.5, 1.5, 0.5}));
    Proxy art = box("art", {2, 3.98}, {0.6, 0.04, 0.5});
    art.placement_type = PlacementType::wall;
    p.statements.push_back(art);
    const auto [out, report] = correct_placements(p);
    EXPECT_TRUE(report.empty());
    EXPECT_EQ(out, p);
}

TEST(Corrector, GridNeighborhoodProperty) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const double step = 0.02 + 0.2 * u(rng), radius = step * (1 + 10 * u(rng));
        const Vec2 c{u(rng), u(rng)};
        const auto pts = grid_neighborhood(c, step, radius);
        std::size_t expect = 0;
        const int n = static_cast<int>(radius / step) + 1;
        for (int i = -n; i <= n; ++i)
            for (int j = -n; j <= n; ++j) expect += std::hypot(i * step, j * step) <= radius + 1e-9;
        EXPECT_EQ(pts.size(), expect);
        for (const auto& q : pts) EXPECT_LE(norm(q - c), radius + 1e-9);
    }
}

TEST(Corrector, RejectsBadConfig) {
    CorrectionConfig cfg;
    cfg.grid_step = 0.0;
    EXPECT_THROW(correct_placements(oracle::violating_scene(1), cfg), ConfigError);
    SceneProgram none;
    none.shell.width = 0.0;
    EXPECT_THROW(correct_placements(none), StructuralError);
}

TEST(Fixups, AddsDefaultsAndCamera) {
    SceneProgram p;
    p.shell = rectangular_shell(4, 4);
    p.statements.push_back(box("a", {1, 1}, {1, 1, 1}));
    p.statements.push_back(Light{"sun", LightKind::sun, {0, 0, 5}, {0, 0, -1}, 500.0});
    const auto [out, fixes] = static_fixups(p);
    std::set<std::string> kinds;
    for (const auto& f : fixes) kinds.insert(f.kind);
    EXPECT_EQ(kinds, (std::set<std::string>{"default_material", "light_clamp", "missing_camera"}));
    EXPECT_EQ(geometry_hash(out), geometry_hash(p));
    const auto [again, none] = static_fixups(out);
    EXPECT_TRUE(none.empty());
}
