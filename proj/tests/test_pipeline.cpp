#include "car/pipeline.hpp"
#include "car/suite.hpp"

#include "test_util.hpp"

using namespace testutil;

namespace {

PipelineConfig config_for(const std::string& scene, const std::filesystem::path& run_dir) {
    PipelineConfig cfg;
    cfg.scene_id = scene;
    cfg.image = fixture("scenes/" + scene + "/image.png");
    cfg.run_dir = run_dir;
    cfg.prompts_dir = oracle::source("prompts/v1");
    cfg.asset_root = fixture("assets");
    return cfg;
}

}  // namespace

TEST(Pipeline, BedroomCompletes) {
    TempDir dir("pipe");
    ScriptedProvider provider(fixture("providers"));
    const RunState st = Pipeline(config_for("bedroom", dir.path), provider).run();
    ASSERT_TRUE(st.completed()) << to_json(st).dump(2);
    for (const char* f : {"out/final_program.json", "out/scene.blend.py", "report.json", "memory/index.json", "config.json"})
        EXPECT_TRUE(std::filesystem::exists(dir.path / f)) << f;
    for (const auto& [name, rel] : st.artifacts) EXPECT_TRUE(std::filesystem::exists(dir.path / rel)) << name;

    const SceneProgram final_program = parse(read_text(dir.path / kFinalProgram));
    // The corrector leaves no unresolved overlaps among floor objects.
    EXPECT_DOUBLE_EQ(self_overlap(final_program), 0.0);
    const json m = evaluate_run(dir.path, load_annotation(fixture("annotations/bedroom.json")));
    EXPECT_DOUBLE_EQ(m.at("obj_recall").get<double>(), 1.0);
    EXPECT_GT(m.at("layout_iou").get<double>(), 0.9);

    // Memory holds every stage's outputs and the loop iterations.
    const MemoryStore mem = load_memory(dir.path / "memory");
    for (int s : kStages) {
        bool any = false;
        for (std::size_t i = 0; i < mem.size(); ++i) any = any || mem[i].stage == s;
        EXPECT_TRUE(any) << "stage " << s;
    }
}

TEST(Pipeline, SchemaFailureHaltsAtStage5) {
    TempDir dir("broken");
    ScriptedProvider provider(fixture("providers"));
    PipelineConfig cfg = config_for("bedroom", dir.path);
    cfg.scene_id = "bedroom_broken5";
    cfg.image = fixture("scenes/bedroom_broken5/image.png");
    const RunState st = Pipeline(cfg, provider).run();
    EXPECT_FALSE(st.completed());
    ASSERT_EQ(st.failed_stage(), 5);
    EXPECT_EQ(st.stages.at(5).error_kind, "schema");
    EXPECT_EQ(st.stages.at(5).provider_attempts, 3);
    for (int s : {1, 2, 3, 4}) EXPECT_EQ(st.stages.at(s).status, StageStatus::ok);
    for (int s : {6, 8, 9, 10}) EXPECT_NE(st.stages.at(s).status, StageStatus::ok);
    EXPECT_FALSE(std::filesystem::exists(dir.path / kFinalProgram));
    EXPECT_EQ(evaluate_run(dir.path, load_annotation(fixture("annotations/bedroom.json"))).at("completion"), false);
}

TEST(Pipeline, ReplayFromStageReproducesOutput) {
    TempDir dir("replay");
    ScriptedProvider provider(fixture("providers"));
    const PipelineConfig cfg = config_for("office", dir.path);
    ASSERT_TRUE(Pipeline(cfg, provider).run().completed());
    const std::string first = read_text(dir.path / kFinalProgram);
    const std::string script = read_text(dir.path / "out/scene.blend.py");
    for (int from : {3, 8, 10}) {
        const RunState st = Pipeline(cfg, provider).replay(from);
        ASSERT_TRUE(st.completed()) << "from " << from;
        EXPECT_EQ(read_text(dir.path / kFinalProgram), first) << "from " << from;
        EXPECT_EQ(read_text(dir.path / "out/scene.blend.py"), script);
    }
    EXPECT_THROW(Pipeline(cfg, provider).replay(7), ConfigError);
}

TEST(Pipeline, MissingImageIsLoadError) {
    TempDir dir("noimg");
    ScriptedProvider provider(fixture("providers"));
    PipelineConfig cfg = config_for("bedroom", dir.path);
    cfg.image = dir.path / "nope.png";
    EXPECT_THROW(Pipeline(cfg, provider).run(), LoadError);
}

TEST(Pipeline, NoMemoryLosesContext) {
    TempDir full("full"), ablated("ablated");
    ScriptedProvider provider(fixture("providers"));
    PipelineConfig a = config_for("living_room", full.path), b = config_for("living_room", ablated.path);
    b.no_memory = true;
    ASSERT_TRUE(Pipeline(a, provider).run().completed());
    Pipeline(b, provider).run();
    const Annotation ann = load_annotation(fixture("annotations/living_room.json"));
    const json ma = evaluate_run(full.path, ann), mb = evaluate_run(ablated.path, ann);
    if (!mb.value("completion", true)) SUCCEED() << "ablated run stopped early";
    else EXPECT_LE(mb.at("obj_recall").get<double>(), ma.at("obj_recall").get<double>());
}
