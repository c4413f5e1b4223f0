#include "car/metrics.hpp"
#include "car/suite.hpp"

#include "test_util.hpp"

using namespace testutil;

namespace {

SceneProgram room_with(std::vector<Proxy> boxes, double w = 4.0, double d = 2.0) {
    SceneProgram p;
    p.shell = rectangular_shell(w, d);
    for (auto& b : boxes) p.statements.push_back(std::move(b));
    return p;
}

SceneProgram random_boxes(std::mt19937_64& rng, const RoomShell& shell, int n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SceneProgram p;
    p.shell = shell;
    static const char* cats[] = {"bed", "desk", "chair", "sofa"};
    for (int i = 0; i < n; ++i) {
        Proxy b = box("o" + std::to_string(i), {shell.width * u(rng), shell.depth * u(rng)},
                      {0.2 + u(rng), 0.2 + u(rng), 0.3 + u(rng)}, normalize_yaw(7 * u(rng)));
        b.category = cats[rng() % 4];
        p.statements.push_back(b);
    }
    return p;
}

// Cell-center IoU computed from the oracle rectangles.
double oracle_iou(const SceneProgram& a, const SceneProgram& b, double cell) {
    const int nx = static_cast<int>(std::llround(b.shell.width / cell)), ny = static_cast<int>(std::llround(b.shell.depth / cell));
    std::size_t inter = 0, uni = 0;
    auto hit = [](const SceneProgram& p, Vec2 c) {
        for (const auto* s : objects_of(p))
            if (oracle::rect_of(std::get<Proxy>(*s)).inside(c)) return true;
        return false;
    };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const Vec2 c{(i + 0.5) * cell, (j + 0.5) * cell};
            const bool x = hit(a, c), y = hit(b, c);
            inter += x && y;
            uni += x || y;
        }
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

}  // namespace

TEST(Metrics, GoldenFixture) {
    const Annotation a = load_annotation(fixture("metrics/annotation.json"));
    const SceneProgram pred = parse(read_text(fixture("metrics/pred_program.json")));
    const json want = json::parse(read_text(fixture("metrics/metrics.json")));
    const json got = to_json(evaluate(pred, a));
    for (auto col : kRateColumns) EXPECT_NEAR(got.at(std::string(col)).get<double>(), want.at(std::string(col)).get<double>(), 1e-9) << col;
    EXPECT_EQ(got.at("exec_ok"), "unavailable");
}

TEST(Metrics, AnalyticIou) {
    const SceneProgram gt = room_with({box("a", {1, 1}, {2, 2, 1})});
    const SceneProgram pred = room_with({box("a", {2, 1}, {2, 2, 1})});
    EXPECT_NEAR(layout_iou(pred, gt), 1.0 / 3.0, 0.01);
    EXPECT_DOUBLE_EQ(layout_iou(gt, gt), 1.0);
    // A prediction in a room twice as large is stretched onto the gt shell.
    const SceneProgram big = room_with({box("a", {2, 2}, {4, 4, 1})}, 8.0, 4.0);
    EXPECT_DOUBLE_EQ(layout_iou(big, gt), 1.0);
}

TEST(Metrics, SelfOverlapAnalytic) {
    EXPECT_DOUBLE_EQ(self_overlap(room_with({box("a", {1, 1}, {1, 1, 1}), box("b", {1, 1}, {1, 1, 1})})), 0.5);
    EXPECT_DOUBLE_EQ(self_overlap(room_with({box("a", {1, 1}, {1, 1, 1}), box("b", {1.5, 1}, {1, 1, 1})})), 0.25);
    EXPECT_DOUBLE_EQ(self_overlap(room_with({box("a", {1, 1}, {1, 1, 1}), box("b", {3, 1}, {1, 1, 1})})), 0.0);
    // Rugs lie under furniture.
    EXPECT_DOUBLE_EQ(self_overlap(room_with({box("a", {1, 1}, {1, 1, 1}), box("rug", {1, 1}, {2, 2, 0.01})})), 0.0);
}

TEST(Metrics, IouMatchesOracleRaster) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 15; ++t) {
        const RoomShell shell = rectangular_shell(3.0, 2.5);
        const SceneProgram a = random_boxes(rng, shell, 1 + static_cast<int>(rng() % 5));
        const SceneProgram b = random_boxes(rng, shell, 1 + static_cast<int>(rng() % 5));
        MetricsConfig cfg;
        cfg.raster_cell = 0.02;
        EXPECT_NEAR(layout_iou(a, b, cfg), oracle_iou(a, b, 0.02), 1e-3) << "trial " << t;
    }
}

TEST(Metrics, RatesBoundedProperty) {
    std::mt19937_64 rng(77);
    const Annotation base = load_annotation(fixture("metrics/annotation.json"));
    for (int t = 0; t < 100; ++t) {
        Annotation a;
        a.gt = random_boxes(rng, rectangular_shell(4.0, 3.5), 1 + static_cast<int>(rng() % 6));
        const SceneProgram pred = random_boxes(rng, rectangular_shell(3.0 + static_cast<double>(rng() % 3), 3.0), static_cast<int>(rng() % 7));
        a.relations.push_back({"o0", "against_wall", "wall_north"});
        if (objects_of(a.gt).size() > 1) a.relations.push_back({"o0", "left_of", "o1"});
        a.zones = base.zones;
        const json r = to_json(evaluate(pred, a));
        for (auto col : kRateColumns) {
            const double v = r.at(std::string(col)).get<double>();
            ASSERT_GE(v, 0.0) << col;
            ASSERT_LE(v, 1.0) << col;
        }
        // Perfect prediction scores one everywhere it is defined.
        const json self = to_json(evaluate(a.gt, a));
        EXPECT_DOUBLE_EQ(self.at("obj_recall").get<double>(), 1.0);
        EXPECT_DOUBLE_EQ(self.at("layout_iou").get<double>(), 1.0);
        EXPECT_DOUBLE_EQ(self.at("rotation_acc").get<double>(), 1.0);
    }
}

TEST(Metrics, MatchingUsesAliasesAndCategories) {
    SceneProgram gt = room_with({box("s", {1, 1}, {1, 1, 1})});
    std::get<Proxy>(gt.statements[0]).category = "sofa";
    SceneProgram pred = room_with({box("x", {3, 1}, {1, 1, 1}), box("y", {1.1, 1}, {1, 1, 1})});
    std::get<Proxy>(pred.statements[0]).category = "couch";
    std::get<Proxy>(pred.statements[1]).category = "chair";
    EXPECT_DOUBLE_EQ(object_recall(pred, gt), 0.0);
    const auto m = match_objects(pred, gt, {{"couch", "sofa"}});
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].pred, "x");
}

TEST(Metrics, RotationSymmetry) {
    EXPECT_NEAR(yaw_error(0.1, 0.1 + std::numbers::pi, 2), 0.0, 1e-12);
    EXPECT_NEAR(yaw_error(0.0, std::numbers::pi, 1), std::numbers::pi, 1e-12);
    EXPECT_NEAR(yaw_error(-3.1, 3.1, 1), 2 * std::numbers::pi - 6.2, 1e-12);
}
