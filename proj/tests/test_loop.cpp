#include "car/refine_loop.hpp"
#include "car/simulation.hpp"

#include "test_util.hpp"

using namespace testutil;

namespace {

SceneProgram two_boxes() {
    SceneProgram p;
    p.shell = rectangular_shell(4, 4);
    p.statements.push_back(box("a", {1, 1}, {0.5, 0.5, 0.5}));
    p.statements.push_back(box("b", {3, 3}, {0.5, 0.5, 0.5}));
    return p;
}

struct Counting {
    int critiques = 0, revisions = 0;
    std::vector<int> iterations;
    FunctionProvider provider{"counting", [this](const ProviderRequest& r) -> std::string {
                                  iterations.push_back(r.iteration);
                                  if (r.stage_tag == "stage3_critique") {
                                      ++critiques;
                                      return json{{"score", score}, {"issues", json::array()}}.dump();
                                  }
                                  ++revisions;
                                  return json{{"edits", {{{"op", "move"}, {"id", "a"}, {"position", {1.0 + 0.1 * revisions, 1.0, 0.0}}}}}}.dump();
                              }};
    double score = 2.0;
};

const Renderer kNoRender = [](const SceneProgram&, int t) { return "render_" + std::to_string(t) + ".png"; };

}  // namespace

TEST(Loop, SanitizeSixIssues) {
    const json j = json::parse(read_text(fixture("loop/critique_six_issues.json")));
    const Critique c = critique_from_json(j.at("critique"));
    ASSERT_EQ(c.issues.size(), 6u);
    const SceneGraph g = graph_from_json(j.at("graph"));
    const SanitizeResult r = sanitize(c, {nullptr, &g, nullptr});
    std::vector<Issue> expected;
    for (const auto& k : j.at("expected_kept")) expected.push_back(c.issues[k.get<std::size_t>()]);
    EXPECT_EQ(r.critique.issues, expected);
    EXPECT_EQ(r.dropped.size(), 6u - expected.size());
    EXPECT_EQ(r.critique.score, c.score);
}

TEST(Loop, StopsAtThreshold) {
    Counting c;
    c.score = 9.0;
    const auto [out, trace] = run_loop(two_boxes(), {}, {5, 8.5}, kNoRender, c.provider);
    EXPECT_EQ(trace.iterations.size(), 1u);
    EXPECT_EQ(trace.stop_reason, "threshold");
    EXPECT_EQ(c.critiques, 1);
    EXPECT_EQ(c.revisions, 0);
    EXPECT_EQ(out, two_boxes());
}

TEST(Loop, RunsExactlyTMax) {
    Counting c;
    const auto [out, trace] = run_loop(two_boxes(), {}, {5, 8.5}, kNoRender, c.provider);
    EXPECT_EQ(trace.iterations.size(), 5u);
    EXPECT_EQ(trace.stop_reason, "t_max");
    EXPECT_EQ(c.critiques, 5);
    EXPECT_EQ(c.revisions, 5);
    EXPECT_EQ(c.iterations, (std::vector<int>{1, 1, 2, 2, 3, 3, 4, 4, 5, 5}));
    EXPECT_NEAR(object_pose(out.statements[0]).position.x, 1.5, 1e-12);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(trace.iterations[i].t, static_cast<int>(i) + 1);
    EXPECT_EQ(trace.final_hash, program_hash(out));
}

TEST(Loop, ZeroBudgetIsIdentity) {
    Counting c;
    const auto [out, trace] = run_loop(two_boxes(), {}, {0, 8.5}, kNoRender, c.provider);
    EXPECT_TRUE(trace.iterations.empty());
    EXPECT_EQ(c.critiques, 0);
    EXPECT_EQ(out, two_boxes());
}

TEST(Loop, RenderFailureCarriesTrace) {
    Counting c;
    const Renderer flaky = [](const SceneProgram&, int t) -> std::string {
        if (t == 3) throw std::runtime_error("no gpu");
        return "r.png";
    };
    try {
        run_loop(two_boxes(), {}, {5, 8.5}, flaky, c.provider);
        FAIL();
    } catch (const LoopError& e) {
        EXPECT_EQ(e.trace.iterations.size(), 2u);
        EXPECT_NE(std::string(e.what()).find("iteration 3"), std::string::npos);
    }
}

TEST(Loop, BadEditIsRecordedNotFatal) {
    FunctionProvider p("p", [](const ProviderRequest& r) -> std::string {
        if (r.stage_tag == "stage3_critique") return R"({"score": 1, "issues": []})";
        return R"({"edits": [{"op": "move", "id": "ghost", "position": [1, 1, 0]}]})";
    });
    const auto [out, trace] = run_loop(two_boxes(), {}, {2, 8.5}, kNoRender, p);
    ASSERT_EQ(trace.iterations.size(), 2u);
    EXPECT_TRUE(trace.iterations[0].revision_error.has_value());
    EXPECT_EQ(out, two_boxes());
}

TEST(Loop, ApplyEditsOps) {
    const json edits = {{"edits",
                         {{{"op", "move"}, {"id", "a"}, {"position", {2.0, 2.0, 0.0}}},
                          {{"op", "rotate"}, {"id", "a"}, {"yaw", 4.0}},
                          {{"op", "resize"}, {"id", "b"}, {"size", {1.0, 1.0, 1.0}}},
                          {{"op", "add"}, {"id", "c"}, {"category", "stool"}, {"position", {0.5, 3.5, 0.0}}, {"size", {0.3, 0.3, 0.4}}},
                          {{"op", "remove"}, {"id", "b"}}}}};
    const SceneProgram out = apply_edits(two_boxes(), edits);
    SceneProgram& o = const_cast<SceneProgram&>(out);
    EXPECT_EQ(object_pose(*find_object(o, "a")).position, (Vec3{2, 2, 0}));
    EXPECT_NEAR(object_pose(*find_object(o, "a")).yaw, 4.0 - 2 * std::numbers::pi, 1e-12);
    EXPECT_EQ(find_object(o, "b"), nullptr);
    EXPECT_NE(find_object(o, "c"), nullptr);
}

TEST(Loop, NoisyCriticImprovesOnAverage) {
    double iou0 = 0.0, iou5 = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const SimScene sc = make_sim_scene(seed);
        const SceneGraph g = graph_of(sc.target);
        LoopContext ctx;
        ctx.sanitize.graph = &g;
        NoisyCritic critic(sc.target, seed);
        const auto [out, trace] = run_loop(sc.initial, ctx, {5, 9.5}, kNoRender, critic);
        iou0 += layout_iou(sc.initial, sc.target);
        iou5 += layout_iou(out, sc.target);
    }
    EXPECT_GE(iou5, iou0);
}
