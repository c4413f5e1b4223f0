// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// failed. Runs offline on the shipped fixtures.

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "car/codegen.hpp"
#include "car/core_model.hpp"
#include "car/suite.hpp"
#include "oracles.hpp"

using namespace car;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
    void fail(const std::string& why) {
        if (ok) detail = why;
        ok = false;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 3) {
    std::ostringstream s;
    s.precision(prec);
    s << std::fixed << v;
    return s.str();
}

PipelineConfig scene_config(const SuiteScene& sc, const fs::path& run_dir) {
    PipelineConfig cfg;
    cfg.scene_id = sc.id;
    cfg.image = sc.image;
    cfg.run_dir = run_dir;
    cfg.prompts_dir = oracle::source("prompts/v1");
    cfg.asset_root = oracle::fixture("assets");
    return cfg;
}

// Relative path -> bytes for every file below `root`.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_text(e.path());
    return out;
}

Outcome determinism(const fs::path& scratch) {
    Outcome o;
    const auto t0 = Clock::now();
    const Suite suite = load_suite(oracle::fixture("suite.json"));
    ScriptedProvider provider(oracle::fixture("providers"));
    std::size_t files = 0;
    for (const auto& sc : suite.scenes) {
        const fs::path a = scratch / "det" / "a" / sc.id, b = scratch / "det" / "b" / sc.id;
        const RunState ra = Pipeline(scene_config(sc, a), provider).run();
        const RunState rb = Pipeline(scene_config(sc, b), provider).run();
        if (!ra.completed() || !rb.completed()) o.fail(sc.id + " did not complete all stages");
        const auto sa = snapshot(a), sb = snapshot(b);
        files += sa.size();
        if (sa != sb) {
            for (const auto& [k, v] : sa)
                if (!sb.count(k) || sb.at(k) != v) {
                    o.fail(sc.id + ": " + k + " differs");
                    break;
                }
            o.fail(sc.id + ": file sets differ");
        }
    }
    const double dt = seconds_since(t0);
    if (dt >= 60.0) o.fail("took " + fmt(dt, 1) + " s");
    if (o.ok) o.detail = std::to_string(suite.scenes.size()) + " scenes x 2 runs, " + std::to_string(files) + " files identical, " + fmt(dt, 2) + " s";
    return o;
}

Outcome corrector_sound_optimal(std::vector<std::pair<SceneProgram, SceneProgram>>& corrected) {
    Outcome o;
    const auto t0 = Clock::now();
    const CorrectionConfig cfg;
    std::size_t moved = 0, unresolved = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const SceneProgram in = oracle::violating_scene(seed);
        const auto [out, report] = correct_placements(in, cfg);
        moved += report.entries.size();
        unresolved += report.unresolved.size();
        const auto check = oracle::check_correction(in, out, report, cfg);
        if (!check.sound) o.fail("seed " + std::to_string(seed) + " unsound: " + check.detail);
        if (!check.optimal) o.fail("seed " + std::to_string(seed) + " not optimal: " + check.detail);
        corrected.emplace_back(in, out);
    }
    const double dt = seconds_since(t0);
    if (dt >= 30.0) o.fail("took " + fmt(dt, 1) + " s");
    if (o.ok) o.detail = "100 scenes, " + std::to_string(moved) + " moves, " + std::to_string(unresolved) + " unresolved, " + fmt(dt, 2) + " s";
    return o;
}

Outcome corrector_idempotent(const std::vector<std::pair<SceneProgram, SceneProgram>>& corrected) {
    Outcome o;
    for (std::size_t i = 0; i < corrected.size(); ++i) {
        const auto [again, report] = correct_placements(corrected[i].second);
        if (!report.entries.empty()) o.fail("scene " + std::to_string(i + 1) + ": second pass moved " + report.entries.front().id);
        if (again != corrected[i].second) o.fail("scene " + std::to_string(i + 1) + ": program changed");
    }
    if (o.ok) o.detail = std::to_string(corrected.size()) + " scenes, zero changes";
    return o;
}

// Random program with assemblies, materials and a texture bind; appearance
// passes must leave the object statements untouched.
Outcome pass_safety() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 50; ++n) {
        SceneProgram p;
        p.shell = rectangular_shell(3 + 4 * u(rng), 3 + 4 * u(rng));
        p.shell.cutouts.push_back({"win", CutoutKind::window, "wall_north", 1.0, 0.8, 1.0, 0.9});
        GeometryDict parts;
        const int count = 2 + static_cast<int>(6 * u(rng));
        for (int i = 0; i < count; ++i) {
            Proxy b;
            b.id = "o" + std::to_string(i);
            b.category = u(rng) < 0.5 ? "table" : "chair";
            b.size = {0.3 + u(rng), 0.3 + u(rng), 0.3 + u(rng)};
            b.pose = {{p.shell.width * u(rng), p.shell.depth * u(rng), 0.0}, normalize_yaw(7 * u(rng))};
            p.statements.push_back(b);
            if (u(rng) < 0.6)
                parts[b.id] = {{"body", Primitive::box, b.size, {0, 0, b.size.z / 2}, {}},
                               {"glass_top", Primitive::cylinder, {b.size.x, b.size.y, 0.02}, {0, 0, b.size.z + 0.01}, {}}};
        }
        const auto [replaced, dict] = replace_with_parts(p, parts);
        for (std::size_t i = 0; i < p.statements.size(); ++i)
            if (!(object_pose(replaced.statements[i]) == object_pose(p.statements[i])))
                o.fail("program " + std::to_string(n) + ": replace moved " + *object_id(p.statements[i]));

        const std::string h0 = geometry_hash(replaced);
        std::vector<MaterialAssign> mats;
        for (const auto* s : objects_of(replaced))
            mats.push_back({*object_id(*s), {u(rng) < 0.3 ? "glass" : "wood", {u(rng), u(rng), u(rng)}, u(rng), u(rng), 0.5},
                            ShaderOverride::none, std::nullopt});
        mats.push_back({"shell/floor", {"wood", {0.5, 0.4, 0.3}, 0.6, 0.0, 0.5}, ShaderOverride::none, std::nullopt});
        const auto m = apply_materials(replaced, mats);
        if (geometry_hash(m.program) != h0) o.fail("program " + std::to_string(n) + ": apply_materials changed geometry");
        const auto t = apply_textures(m.program, {{"shell/floor", "textures/missing.png", {}, false},
                                                  {objects_of(replaced).front() ? *object_id(*objects_of(replaced).front()) : "", "builtin:checker", {}, false}});
        if (geometry_hash(t.program) != h0) o.fail("program " + std::to_string(n) + ": apply_textures changed geometry");
        LightingPlan plan;
        plan.windows = {"win"};
        plan.artificial.push_back({LightKind::point, {1, 1, 2.3}, 60.0, {1, 1, 1}});
        const auto r = render_setup(t.program, plan);
        if (geometry_hash(r) != h0) o.fail("program " + std::to_string(n) + ": render_setup changed geometry");
        // Independent check: object statements are bitwise identical.
        std::vector<Statement> before, after;
        for (const auto& s : replaced.statements)
            if (is_object(s)) before.push_back(s);
        for (const auto& s : r.statements)
            if (is_object(s)) after.push_back(s);
        if (before != after) o.fail("program " + std::to_string(n) + ": object statements changed");
    }
    if (o.ok) o.detail = "50 programs, geometry hash and object statements unchanged";
    return o;
}

Outcome geometry_kernel() {
    Outcome o;
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        auto rect = [&] {
            return oracle::Rect{{2 * u(rng), 2 * u(rng)}, 0.05 + 0.9 * u(rng), 0.05 + 0.9 * u(rng), normalize_yaw(7 * u(rng))};
        };
        const oracle::Rect a = rect(), b = rect();
        const Footprint fa = oracle::to_footprint(a), fb = oracle::to_footprint(b);
        const double exact = overlap_area(fa, fb);
        const double mc = oracle::mc_overlap(a, b, 316, rng);
        const double tol = 1e-3 * std::min(a.area(), b.area());
        worst = std::max(worst, std::abs(exact - mc) / std::min(a.area(), b.area()));
        if (std::abs(exact - mc) > tol) o.fail("pair " + std::to_string(i) + ": exact " + fmt(exact, 6) + " vs MC " + fmt(mc, 6));
        if (overlap_area(fb, fa) != exact) o.fail("pair " + std::to_string(i) + ": asymmetric");
        if (overlap_area(fa, fa) != fa.area()) o.fail("pair " + std::to_string(i) + ": self-area");
    }
    if (o.ok) o.detail = "1000 pairs, worst |exact-MC|/min-area " + fmt(worst * 1e3, 3) + "e-3";
    return o;
}

Outcome metrics_sanity() {
    Outcome o;
    const auto room = [](std::vector<std::array<double, 4>> boxes) {
        SceneProgram p;
        p.shell = rectangular_shell(4.0, 2.0);
        int i = 0;
        for (const auto& b : boxes) {
            Proxy x;
            x.id = "b" + std::to_string(i++);
            x.category = "box";
            x.size = {b[2], b[3], 1.0};
            x.pose.position = {b[0], b[1], 0.0};
            p.statements.push_back(x);
        }
        return p;
    };
    const SceneProgram gt = room({{1, 1, 2, 2}});
    if (layout_iou(gt, gt) != 1.0) o.fail("iou(gt, gt) != 1");
    const struct {
        SceneProgram pred;
        double expect;
    } cases[] = {{room({{2, 1, 2, 2}}), 1.0 / 3.0}, {room({{1, 1, 1, 1}}), 0.25}, {room({{3, 1, 2, 2}}), 0.0}, {room({{1.5, 1, 3, 2}}), 2.0 / 3.0}};
    for (const auto& c : cases)
        if (std::abs(layout_iou(c.pred, gt) - c.expect) > 0.01) o.fail("analytic IoU " + fmt(c.expect) + " got " + fmt(layout_iou(c.pred, gt)));
    if (self_overlap(room({{0.5, 0.5, 1, 1}, {2.5, 1, 1, 1}})) != 0.0) o.fail("disjoint self_overlap != 0");

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        auto scene = [&](double w, double d) {
            SceneProgram p;
            p.shell = rectangular_shell(w, d);
            const int n = static_cast<int>(u(rng) * 7);
            for (int i = 0; i < n; ++i) {
                Proxy x;
                x.id = "o" + std::to_string(i);
                x.category = i % 2 ? "chair" : "table";
                x.size = {0.2 + u(rng), 0.2 + u(rng), 0.3 + u(rng)};
                x.pose = {{w * u(rng), d * u(rng), 0.0}, normalize_yaw(7 * u(rng))};
                p.statements.push_back(x);
            }
            return p;
        };
        Annotation a;
        a.gt = scene(4, 3);
        if (!objects_of(a.gt).empty()) a.relations.push_back({"o0", "against_wall", "wall_south"});
        a.zones.push_back({"center", {{1, 1}, {3, 1}, {3, 2}, {1, 2}}, {"table"}});
        const json r = to_json(evaluate(scene(3 + u(rng) * 2, 2 + u(rng) * 2), a));
        for (auto col : kRateColumns) {
            const double v = r.at(std::string(col)).get<double>();
            if (!(v >= 0.0 && v <= 1.0)) o.fail("pair " + std::to_string(t) + ": " + std::string(col) + " = " + fmt(v));
        }
    }

    const Annotation golden = load_annotation(oracle::fixture("metrics/annotation.json"));
    const json got = to_json(evaluate(parse(read_text(oracle::fixture("metrics/pred_program.json"))), golden));
    const json want = json::parse(read_text(oracle::fixture("metrics/metrics.json")));
    double worst = 0.0;
    for (auto col : kRateColumns) {
        const double d = std::abs(got.at(std::string(col)).get<double>() - want.at(std::string(col)).get<double>());
        worst = std::max(worst, d);
        if (d > 1e-9) o.fail("golden " + std::string(col) + " off by " + std::to_string(d));
    }
    if (o.ok) {
        std::ostringstream s;
        s.precision(2);
        s << "analytic cases, 100 random pairs, golden max |diff| " << std::scientific << worst;
        o.detail = s.str();
    }
    return o;
}

Outcome loop_contract() {
    Outcome o;
    SceneProgram p;
    p.shell = rectangular_shell(4, 4);
    Proxy b;
    b.id = "a";
    b.category = "box";
    b.size = {0.5, 0.5, 0.5};
    b.pose.position = {1, 1, 0};
    p.statements.push_back(b);
    const Renderer render = [](const SceneProgram&, int t) { return "r" + std::to_string(t) + ".png"; };

    auto scripted = [](double score, int* critiques) {
        return FunctionProvider("scripted-critic", [score, critiques](const ProviderRequest& r) -> std::string {
            if (r.stage_tag == "stage3_critique") {
                ++*critiques;
                return json{{"score", score}, {"issues", json::array()}}.dump();
            }
            return R"({"edits": []})";
        });
    };
    int c1 = 0, c2 = 0;
    auto happy = scripted(9.0, &c1);
    auto grumpy = scripted(3.0, &c2);
    const auto [_, t1] = run_loop(p, {}, {5, 8.5}, render, happy);
    if (t1.iterations.size() != 1 || c1 != 1 || t1.stop_reason != "threshold") o.fail("(a) did not stop after 1 iteration");
    const auto [__, t2] = run_loop(p, {}, {5, 8.5}, render, grumpy);
    if (t2.iterations.size() != 5 || c2 != 5 || t2.stop_reason != "t_max") o.fail("(b) ran " + std::to_string(t2.iterations.size()) + " iterations");

    double iou0 = 0.0, iou5 = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const SimScene sc = make_sim_scene(seed);
        const SceneGraph g = graph_of(sc.target);
        LoopContext ctx;
        ctx.sanitize.graph = &g;
        NoisyCritic critic(sc.target, seed);
        const auto [out, trace] = run_loop(sc.initial, ctx, {5, 9.5}, render, critic);
        iou0 += layout_iou(sc.initial, sc.target) / 20.0;
        iou5 += layout_iou(out, sc.target) / 20.0;
    }
    if (iou5 < iou0) o.fail("(c) mean IoU " + fmt(iou5) + " at T=5 below " + fmt(iou0) + " at T=0");
    if (o.ok) o.detail = "(a) 1 iteration, (b) 5 iterations, (c) mean IoU " + fmt(iou0) + " -> " + fmt(iou5) + " over 20 seeds";
    return o;
}

Outcome memory_ablation(const fs::path& scratch) {
    Outcome o;
    const Suite suite = load_suite(oracle::fixture("suite.json"));
    ScriptedProvider provider(oracle::fixture("providers"));
    std::string detail;
    for (const auto& sc : suite.scenes) {
        const Annotation a = load_annotation(sc.annotation);
        PipelineConfig full = scene_config(sc, scratch / "mem" / "full" / sc.id);
        PipelineConfig ablated = scene_config(sc, scratch / "mem" / "none" / sc.id);
        ablated.no_memory = true;
        Pipeline(full, provider).run();
        Pipeline(ablated, provider).run();
        const json mf = evaluate_run(full.run_dir, a), mn = evaluate_run(ablated.run_dir, a);
        if (!mf.value("completion", true)) {
            o.fail(sc.id + ": full-memory run incomplete");
            continue;
        }
        const bool done = mn.value("completion", true);
        const double rf = mf.at("obj_recall").get<double>(), ifl = mf.at("layout_iou").get<double>();
        const double rn = done ? mn.at("obj_recall").get<double>() : 0.0, in = done ? mn.at("layout_iou").get<double>() : 0.0;
        if (rn > rf) o.fail(sc.id + ": recall " + fmt(rn) + " > " + fmt(rf));
        if (in > ifl) o.fail(sc.id + ": IoU " + fmt(in) + " > " + fmt(ifl));
        detail += (detail.empty() ? "" : "; ") + sc.id + " recall " + fmt(rn, 2) + "/" + fmt(rf, 2) + " IoU " + fmt(in, 2) + "/" + fmt(ifl, 2);
    }
    if (o.ok) o.detail = "no_memory/full: " + detail;
    return o;
}

Outcome scene_graph() {
    Outcome o;
    const json j = json::parse(read_text(oracle::fixture("graph/adversarial.json")));
    const SceneDescription desc = description_from_json(j.at("description"));
    std::vector<GraphEdge> edges;
    std::size_t invalid = 0;
    std::vector<bool> expect_drop;
    for (const auto& e : j.at("edges")) {
        edges.push_back({e.at("src"), e.at("dst"), *relation_from_string(e.at("relation").get<std::string>()), Provenance::vlm});
        expect_drop.push_back(!e.at("expect_drop").is_null());
        invalid += expect_drop.back();
    }
    const GraphCompletion c = complete_graph(derive_skeleton(desc), edges, desc);
    if (c.dropped.size() != invalid) o.fail("dropped " + std::to_string(c.dropped.size()) + ", expected " + std::to_string(invalid));
    // Duplicates share a triple with a kept edge, so compare multisets.
    std::multiset<decltype(edges[0].triple())> want, got;
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (!expect_drop[i]) want.insert(edges[i].triple());
    for (const auto& x : c.graph.edges)
        if (x.provenance == Provenance::vlm) got.insert(x.triple());
    if (want != got) o.fail("kept " + std::to_string(got.size()) + " proposed edges, expected " + std::to_string(want.size()));
    // Independent inverse count.
    const std::map<std::string, std::string> inv = {{"parent_of", "child_of"}, {"child_of", "parent_of"}, {"left_of", "right_of"},
                                                    {"right_of", "left_of"},   {"front_of", "behind"},    {"behind", "front_of"},
                                                    {"on_top_of", "under"},    {"under", "on_top_of"},    {"adjacent_to", "adjacent_to"}};
    std::size_t invertible = 0;
    for (const auto& e : c.graph.edges) {
        if (e.provenance == Provenance::inverse) continue;
        const auto it = inv.find(to_string(e.relation));
        if (it == inv.end()) continue;
        ++invertible;
        const auto n = std::count_if(c.graph.edges.begin(), c.graph.edges.end(), [&](const GraphEdge& x) {
            return x.provenance == Provenance::inverse && x.src == e.dst && x.dst == e.src && to_string(x.relation) == it->second;
        });
        if (n != 1) o.fail(e.src + " " + to_string(e.relation) + " " + e.dst + " has " + std::to_string(n) + " inverses");
    }
    if (o.ok) o.detail = std::to_string(invalid) + " invalid edges dropped, " + std::to_string(invertible) + " invertible edges with one inverse each";
    return o;
}

}  // namespace

int main() {
    const fs::path scratch = fs::temp_directory_path() / ("car_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    std::vector<std::pair<SceneProgram, SceneProgram>> corrected;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
        {"full-pipeline determinism", [&] { return determinism(scratch); }},
        {"corrector soundness + optimality", [&] { return corrector_sound_optimal(corrected); }},
        {"corrector idempotence", [&] { return corrector_idempotent(corrected); }},
        {"pass safety", pass_safety},
        {"geometry kernel", geometry_kernel},
        {"metrics sanity", metrics_sanity},
        {"loop contract", loop_contract},
        {"memory ablation direction", [&] { return memory_ablation(scratch); }},
        {"scene-graph construction", scene_graph},
    };
    int failed = 0;
    for (const auto& [name, fn] : checks) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        failed += !o.ok;
        std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::error_code ec;
    fs::remove_all(scratch, ec);
    return failed ? 1 : 0;
}
