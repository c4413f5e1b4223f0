#include "car/codegen.hpp"

#include "test_util.hpp"

using namespace testutil;

namespace {

// Boxes on a coarse lattice so no two footprints touch.
SceneProgram lattice_scene(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SceneProgram p;
    p.shell = rectangular_shell(6.0, 4.5);
    int k = 0;
    for (double x = 0.9; x < 5.5; x += 1.5)
        for (double y = 0.9; y < 4.0; y += 1.5) {
            if (u(rng) < 0.25) continue;
            p.statements.push_back(box("b" + std::to_string(k++), {x + 0.2 * (u(rng) - 0.5), y + 0.2 * (u(rng) - 0.5)},
                                       {0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.5}, normalize_yaw(7 * u(rng))));
        }
    return p;
}

std::string body_from_main(const std::string& script) {
    const auto at = script.find("\ndef main(");
    return at == std::string::npos ? "" : script.substr(at);
}

}  // namespace

TEST(Codegen, PreviewPixelCountsMatchOracle) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const SceneProgram p = lattice_scene(seed);
        const double ppm = 40.0;
        const Preview pv = render_preview(p, ppm);
        ASSERT_EQ(pv.image.width, 240);
        ASSERT_EQ(pv.image.height, 180);
        for (const auto* s : objects_of(p)) {
            const auto r = oracle::rect_of(std::get<Proxy>(*s));
            std::size_t expect = 0;
            for (int y = 0; y < pv.image.height; ++y)
                for (int x = 0; x < pv.image.width; ++x)
                    if (r.inside(Preview::pixel_center(x, y, pv.image.height, ppm))) ++expect;
            // Pixel centers exactly on an edge are the only ambiguity.
            EXPECT_NEAR(static_cast<double>(pv.pixel_count(*object_id(*s))), static_cast<double>(expect), 2.0)
                << *object_id(*s) << " seed " << seed;
        }
    }
}

TEST(Codegen, PreviewTopmostWins) {
    SceneProgram p;
    p.shell = rectangular_shell(2, 2);
    p.statements.push_back(box("table", {1, 1}, {1.0, 1.0, 0.75}));
    Proxy cup = box("cup", {1, 1}, {0.2, 0.2, 0.1});
    cup.parent = "table";
    cup.placement_type = PlacementType::surface;
    cup.pose.position.z = 0.75;
    p.statements.push_back(cup);
    const Preview pv = render_preview(p, 50.0);
    EXPECT_EQ(pv.pixel_count("cup"), 100u);
    EXPECT_EQ(pv.pixel_count("table"), 2500u - 100u);
    const int mid = 50;
    EXPECT_EQ(pv.legend[pv.label(mid, mid) - kFirstObjectLabel], "cup");
}

TEST(Codegen, PngRoundTrip) {
    TempDir dir("png");
    const Preview pv = render_preview(lattice_scene(2), 20.0);
    write_preview(pv, dir.path / "p.png", dir.path / "labels.png");
    const auto size = png_size(read_text(dir.path / "p.png"));
    ASSERT_TRUE(size);
    EXPECT_EQ(size->first, pv.image.width);
    EXPECT_EQ(size->second, pv.image.height);
    EXPECT_TRUE(std::filesystem::exists(dir.path / "labels.json"));
    if (oracle::python_available() && std::system((std::string(CAR_PYTHON) + " -c 'import PIL' 2>/dev/null").c_str()) == 0) {
        const std::string cmd = std::string(CAR_PYTHON) + " -c \"import sys; from PIL import Image; im = Image.open(sys.argv[1]); im.load(); "
                                "sys.exit(0 if im.size == (" + std::to_string(pv.image.width) + ", " +
                                std::to_string(pv.image.height) + ") else 1)\" " + (dir.path / "p.png").string();
        EXPECT_EQ(shell(cmd), 0);
    }
}

TEST(Codegen, ScriptIsDeterministicAndCompiles) {
    TempDir dir("emit");
    write_text(dir.path / "assets/meshes/lamp_01.obj", "v 0 0 0\n");
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SceneProgram p = random_program(seed);
        for (auto& s : p.statements)  // emission needs resolvable textures
            if (auto* m = std::get_if<MaterialAssign>(&s); m && m->image) m->image->image_ref = "builtin:checker";
        std::erase_if(p.statements, [](const Statement& s) { return std::holds_alternative<TextureBind>(s); });
        EmitOptions opts;
        opts.script_dir = dir.path;
        opts.asset_root = dir.path;
        const std::string a = emit_blender_script(p, opts);
        ASSERT_EQ(a, emit_blender_script(p, opts));
        const auto path = dir.path / ("s" + std::to_string(seed) + ".py");
        write_text(path, a);
        if (oracle::python_available()) {
            EXPECT_EQ(shell(std::string(CAR_PYTHON) + " -m py_compile " + path.string()), 0) << "seed " << seed;
        }
    }
}

TEST(Codegen, ShimModeSharesBody) {
    const SceneProgram p = lattice_scene(3);
    EmitOptions self, shim;
    shim.mode = ShimMode::shim_import;
    const std::string a = emit_blender_script(p, self), b = emit_blender_script(p, shim);
    EXPECT_NE(b.find("from car_runtime import *"), std::string::npos);
    EXPECT_EQ(b.find("import bpy"), std::string::npos);
    ASSERT_FALSE(body_from_main(a).empty());
    EXPECT_EQ(body_from_main(a), body_from_main(b));
}

TEST(Codegen, ScriptRunsAgainstStandInBpy) {
    if (!oracle::python_available()) GTEST_SKIP() << "no python";
    TempDir dir("fakebpy");
    const SceneProgram p = lattice_scene(4);
    EmitOptions opts;
    opts.script_dir = dir.path;
    write_text(dir.path / "scene.py", emit_blender_script(p, opts));
    const std::string runner = oracle::source("tests/support/fake_bpy_run.py").string();
    const std::string out = (dir.path / "count.txt").string();
    ASSERT_EQ(std::system((std::string(CAR_PYTHON) + " " + runner + " " + (dir.path / "scene.py").string() + " > " + out).c_str()), 0);
    // Floor, four walls and one mesh per box.
    EXPECT_EQ(std::stoul(read_text(out)), 5u + objects_of(p).size());
}
