#include "car/assets.hpp"

#include "test_util.hpp"

using namespace testutil;

TEST(Assets, LibraryLoads) {
    const AssetLibrary lib = load_library(fixture("assets"));
    EXPECT_EQ(lib.records.size(), 20u);
    for (const auto& r : lib.records) EXPECT_TRUE(std::filesystem::exists(lib.root / r.mesh_ref)) << r.asset_id;
}

TEST(Assets, EachRecordRetrievesItself) {
    const AssetLibrary lib = load_library(fixture("assets"));
    for (const auto& r : lib.records) {
        const auto got = select_asset(lib, {r.label, r.description, r.canonical_size});
        ASSERT_TRUE(got) << r.asset_id;
        EXPECT_EQ(got->asset_id, r.asset_id);
    }
}

TEST(Assets, SizeDisambiguatesSameLabel) {
    const AssetLibrary lib = load_library(fixture("assets"));
    const auto small = select_asset(lib, {"potted plant", "", {0.3, 0.3, 0.55}});
    const auto tall = select_asset(lib, {"potted plant", "", {0.45, 0.45, 1.2}});
    ASSERT_TRUE(small && tall);
    EXPECT_EQ(small->asset_id, "plant_potted_small");
    EXPECT_EQ(tall->asset_id, "plant_potted_tall");
}

TEST(Assets, NoMatchBelowFloor) {
    const AssetLibrary lib = load_library(fixture("assets"));
    EXPECT_FALSE(select_asset(lib, {"xylophone", "brass marching instrument", {5.0, 0.1, 0.1}}));
}

TEST(Assets, ScoresBounded) {
    const AssetLibrary lib = load_library(fixture("assets"));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    for (int i = 0; i < 500; ++i) {
        const MatchQuery q{lib.records[rng() % 20].label, lib.records[rng() % 20].description, {u(rng), u(rng), u(rng)}};
        for (const auto& r : lib.records) {
            const double s = match_score(r, q);
            ASSERT_GE(s, 0.0);
            ASSERT_LE(s, 1.0);
        }
    }
    EXPECT_DOUBLE_EQ(label_similarity("Potted plant", "potted-plant"), 1.0);
    EXPECT_DOUBLE_EQ(size_compatibility({1, 2, 3}, {1, 2, 3}), 1.0);
}

TEST(Assets, FitScaleBoundsDistortion) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 c{u(rng), u(rng), u(rng)}, t{u(rng), u(rng), u(rng)};
        const Vec3 s = fit_scale(c, t);
        const double hi = std::max({s.x, s.y, s.z}), lo = std::min({s.x, s.y, s.z});
        ASSERT_LE(hi / lo, kMaxAspectDistortion + 1e-9);
    }
    const Vec3 exact = fit_scale({1, 1, 1}, {1.2, 1.0, 1.1});
    EXPECT_NEAR(exact.x, 1.2, 1e-12);
    EXPECT_NEAR(exact.z, 1.1, 1e-12);
}

TEST(Assets, SubstituteKeepsPoseAndParent) {
    const AssetLibrary lib = load_library(fixture("assets"));
    SceneProgram p;
    p.shell = rectangular_shell(4, 4);
    p.statements.push_back(box("desk", {2, 2}, {1.2, 0.6, 0.75}, 0.5));
    Proxy plant = box("plant", {2.2, 2.1}, {0.3, 0.3, 0.6}, 0.5);
    plant.parent = "desk";
    plant.placement_type = PlacementType::surface;
    plant.pose.position.z = 0.75;
    p.statements.push_back(plant);
    const SceneProgram out = substitute_placeholder(p, "plant", *lib.find("plant_potted_small"));
    const auto& inst = std::get<AssetInstance>(out.statements[1]);
    EXPECT_EQ(inst.pose, plant.pose);
    EXPECT_EQ(inst.parent, plant.parent);
    EXPECT_EQ(inst.placement_type, PlacementType::surface);
    EXPECT_EQ(out.statements[0], p.statements[0]);
    EXPECT_THROW(substitute_placeholder(out, "plant", *lib.find("plant_potted_small")), LinkError);
}
