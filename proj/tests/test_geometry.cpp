#include "car/geometry.hpp"

#include "test_util.hpp"

using namespace testutil;
using oracle::Rect;

namespace {

Rect random_rect(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {{2.0 * u(rng), 2.0 * u(rng)}, 0.05 + 0.9 * u(rng), 0.05 + 0.9 * u(rng), normalize_yaw(7.0 * u(rng))};
}

}  // namespace

TEST(Geometry, OverlapMatchesMonteCarlo) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 60; ++i) {
        const Rect a = random_rect(rng), b = random_rect(rng);
        const double exact = overlap_area(oracle::to_footprint(a), oracle::to_footprint(b));
        const double mc = oracle::mc_overlap(a, b, 316, rng);
        EXPECT_NEAR(exact, mc, 1e-3 * std::min(a.area(), b.area()))
            << "pair " << i;
    }
}

TEST(Geometry, OverlapSymmetricAndBounded) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto a = oracle::to_footprint(random_rect(rng)), b = oracle::to_footprint(random_rect(rng));
        const double ab = overlap_area(a, b), ba = overlap_area(b, a);
        ASSERT_EQ(ab, ba);
        ASSERT_GE(ab, 0.0);
        ASSERT_LE(ab, std::min(a.area(), b.area()));
        ASSERT_EQ(overlap_area(a, a), a.area());
    }
}

TEST(Geometry, AnalyticCases) {
    const Footprint unit{{0.5, 0.5}, {0.5, 0.5}, 0.0};
    EXPECT_NEAR(overlap_area(unit, {{1.0, 0.5}, {0.5, 0.5}, 0.0}), 0.5, 1e-12);
    EXPECT_EQ(overlap_area(unit, {{1.5, 0.5}, {0.5, 0.5}, 0.0}), 0.0);  // touching edge
    // Square rotated 45 degrees about the shared center: octagon, area 2(sqrt2 - 1).
    EXPECT_NEAR(overlap_area(unit, {{0.5, 0.5}, {0.5, 0.5}, std::numbers::pi / 4}), 2.0 * (std::sqrt(2.0) - 1.0), 1e-12);
    EXPECT_EQ(overlap_area(unit, {{0.5, 0.5}, {1e-4, 0.5}, 0.0}), 0.0);  // degenerate
}

TEST(Geometry, SatAgreesWithPositiveArea) {
    std::mt19937_64 rng(9);
    int disagreements = 0;
    for (int i = 0; i < 5000; ++i) {
        const Rect a = random_rect(rng), b = random_rect(rng);
        const bool sat = oracle::sat_overlap(a, b, 1e-6);
        const double area = overlap_area(oracle::to_footprint(a), oracle::to_footprint(b));
        if (sat != (area > 1e-9)) ++disagreements;
    }
    EXPECT_EQ(disagreements, 0);
}

TEST(Geometry, Containment) {
    const RoomShell room = rectangular_shell(4.0, 3.0);
    EXPECT_TRUE(contained_in_room({{2.0, 1.5}, {2.0, 1.5}, 0.0}, room));
    EXPECT_FALSE(contained_in_room({{2.0, 1.5}, {2.0, 1.5}, 0.1}, room));
    EXPECT_TRUE(contained_in_room({{1.0, 1.0}, {0.5, 0.3}, -std::numbers::pi / 2}, room));
    EXPECT_FALSE(contained_in_room({{0.2, 1.0}, {0.5, 0.3}, 0.0}, room));
}

TEST(Geometry, FacingConvention) {
    EXPECT_NEAR(facing(0.0).y, 1.0, 1e-12);
    EXPECT_NEAR(facing(std::numbers::pi / 2).x, -1.0, 1e-12);
}

TEST(Geometry, AssemblyFootprintCoversParts) {
    Assembly a{"t", "table", {{2.0, 2.0, 0.0}, 0.3}, {}, std::nullopt, PlacementType::floor};
    a.parts.push_back({"top", Primitive::box, {1.2, 0.6, 0.04}, {0.0, 0.0, 0.73}, {}});
    a.parts.push_back({"side", Primitive::box, {0.1, 0.1, 0.7}, {0.8, 0.0, 0.35}, {}});
    const Footprint f = footprint_of(a);
    for (const auto& part : a.parts)
        for (const auto& c : part_footprint(a.pose, part).corners()) EXPECT_TRUE(f.contains_point(c, 1e-9));
}
