// car: command-line front end.
//
// Exit codes: 0 success, 1 a stage failed (run state saved), 2 bad input,
// 3 provider configuration error, 4 internal error.

#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "car/http_provider.hpp"
#include "car/suite.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kStageFailed = 1, kBadInput = 2, kProviderConfig = 3, kInternal = 4 };

struct ProviderOpts {
    std::string kind;          // scripted | http; empty: from the config file
    fs::path config;           // provider JSON
    fs::path fixtures;         // scripted replies
    std::string endpoint;
    std::string model;
    std::string api_key_env = "CAR_API_KEY";
    int retries = car::kDefaultRetries;
};

void add_provider_options(CLI::App* cmd, ProviderOpts& p) {
    cmd->add_option("--provider", p.kind, "scripted or http")->check(CLI::IsMember({"scripted", "http"}));
    cmd->add_option("--provider-config", p.config, "provider JSON file");
    cmd->add_option("--fixtures", p.fixtures, "scripted provider reply directory");
    cmd->add_option("--endpoint", p.endpoint, "http provider chat completions URL");
    cmd->add_option("--model", p.model, "http provider model name");
    cmd->add_option("--api-key-env", p.api_key_env, "environment variable holding the API key")->capture_default_str();
    cmd->add_option("--retries", p.retries, "schema retries per call")->capture_default_str();
}

car::ProviderConfig resolve_provider(const ProviderOpts& o) {
    car::ProviderConfig c;
    if (!o.config.empty()) c = car::load_provider_config(o.config);
    if (!o.kind.empty()) c.kind = o.kind;
    if (!o.fixtures.empty()) c.fixtures = o.fixtures;
    if (!o.endpoint.empty()) c.endpoint = o.endpoint;
    if (!o.model.empty()) c.model = o.model;
    if (o.api_key_env != "CAR_API_KEY" || o.config.empty()) c.api_key_env = o.api_key_env;
    c.retries = o.retries;
    if (c.kind == "scripted" && c.fixtures.empty()) throw car::ConfigError("scripted provider needs --fixtures or a config");
    if (c.kind == "http" && (c.endpoint.empty() || c.model.empty()))
        throw car::ConfigError("http provider needs an endpoint and a model");
    if (c.kind == "http" && c.endpoint.rfind("https://", 0) == 0) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        throw car::ConfigError("this build has no https support");
#endif
    }
    return c;
}

std::unique_ptr<car::Provider> make_provider(const car::ProviderConfig& c) {
    if (c.kind == "http") return std::make_unique<car::HttpProvider>(c);
    return std::make_unique<car::ScriptedProvider>(c.fixtures);
}

struct RunOpts {
    std::string scene;
    fs::path image;
    fs::path out;
    fs::path prompts;
    fs::path assets;
    int t_max = 5;
    double s_star = 8.5;
    bool no_memory = false;
    bool shim = false;
    double grid_step = 0.05;
    double max_radius = 1.5;
};

void add_run_options(CLI::App* cmd, RunOpts& r, bool need_image) {
    auto* img = cmd->add_option("--image", r.image, "top-down room image (PNG)");
    if (need_image) img->required()->check(CLI::ExistingFile);
    cmd->add_option("--prompts", r.prompts, "prompt template directory");
    cmd->add_option("--assets", r.assets, "asset library root (index.json)");
    cmd->add_option("--t-max", r.t_max, "refinement loop budget")->capture_default_str();
    cmd->add_option("--s-star", r.s_star, "critic score that stops the loop")->capture_default_str();
    cmd->add_flag("--no-memory", r.no_memory, "reduced memory views");
    cmd->add_flag("--shim", r.shim, "emit scripts that import the runtime shim");
    cmd->add_option("--grid-step", r.grid_step, "corrector grid step (m)")->capture_default_str();
    cmd->add_option("--max-radius", r.max_radius, "corrector search radius (m)")->capture_default_str();
}

car::PipelineConfig pipeline_config(const RunOpts& r) {
    car::PipelineConfig cfg;
    cfg.scene_id = r.scene;
    cfg.image = r.image;
    cfg.run_dir = r.out;
    cfg.prompts_dir = r.prompts;
    cfg.asset_root = r.assets;
    cfg.loop.t_max = r.t_max;
    cfg.loop.s_star = r.s_star;
    cfg.no_memory = r.no_memory;
    cfg.shim = r.shim ? car::ShimMode::shim_import : car::ShimMode::self_contained;
    cfg.correction.grid_step = r.grid_step;
    cfg.correction.max_radius = r.max_radius;
    return cfg;
}

int report_state(const car::RunState& st, const fs::path& run_dir) {
    for (const auto& [s, rec] : st.stages) {
        std::cout << "stage " << s << ": " << car::to_string(rec.status);
        if (!rec.error.empty()) std::cout << " (" << rec.error_kind << ") " << rec.error;
        std::cout << "\n";
        for (const auto& w : rec.warnings) std::cout << "  warning: " << w << "\n";
    }
    std::cout << "run directory: " << run_dir.string() << "\n";
    return st.failed_stage() ? kStageFailed : kOk;
}

std::string cell(const car::json& v) {
    if (v.is_number()) return car::format_number(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

std::string metrics_table(const car::json& m) {
    std::string out;
    for (auto col : car::kRateColumns) {
        std::string name(col);
        name.resize(18, ' ');
        out += name + (m.contains(std::string(col)) ? cell(m[std::string(col)]) : "-") + "\n";
    }
    out += "completion        " + cell(m.value("completion", car::json(false))) + "\n";
    out += "exec_ok           " + cell(m.value("exec_ok", car::json("unavailable"))) + "\n";
    return out;
}

// One row per scene plus a uniform mean over completed scenes.
std::string suite_csv(const car::json& per_scene) {
    std::string out = "scene,completion";
    for (auto col : car::kRateColumns) out += "," + std::string(col);
    out += "\n";
    std::map<std::string, double> sums;
    std::size_t done = 0;
    for (const auto& [id, m] : per_scene.items()) {
        const bool ok = m.value("completion", false);
        out += id + "," + (ok ? "1" : "0");
        for (auto col : car::kRateColumns) {
            const std::string c(col);
            out += "," + (ok ? car::format_number(m.at(c).get<double>()) : std::string());
            if (ok) sums[c] += m.at(c).get<double>();
        }
        done += ok;
        out += "\n";
    }
    out += "mean," + car::format_number(per_scene.empty() ? 0.0 : static_cast<double>(done) / static_cast<double>(per_scene.size()));
    for (auto col : car::kRateColumns)
        out += "," + (done ? car::format_number(sums[std::string(col)] / static_cast<double>(done)) : std::string());
    return out + "\n";
}

car::SceneProgram load_program(const fs::path& p) { return car::parse(car::read_text(p)); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Turns a top-down room image into an executable Blender scene script."};
    app.require_subcommand(1);

    ProviderOpts prov;
    RunOpts run;

    auto* run_cmd = app.add_subcommand("run", "run every stage on one image");
    run_cmd->add_option("--scene", run.scene, "scene id (also the scripted fixture folder)")->required();
    run_cmd->add_option("--out", run.out, "run directory")->required();
    add_run_options(run_cmd, run, true);
    add_provider_options(run_cmd, prov);

    int stage_n = 0;
    bool only = false;
    auto* stage_cmd = app.add_subcommand("stage", "re-run one stage (and by default all later ones) in a run directory");
    stage_cmd->add_option("n", stage_n, "stage number")->required()->check(CLI::IsMember(std::vector<int>(car::kStages.begin(), car::kStages.end())));
    stage_cmd->add_option("--run", run.out, "run directory")->required()->check(CLI::ExistingDirectory);
    stage_cmd->add_flag("--only", only, "re-run this stage alone");
    add_provider_options(stage_cmd, prov);

    fs::path program_path, annotation_path, suite_path, runs_root, out_path;
    auto* eval_cmd = app.add_subcommand("eval", "score programs against annotations");
    eval_cmd->add_option("--pred,--program", program_path, "predicted program")->check(CLI::ExistingFile);
    eval_cmd->add_option("--run", run.out, "run directory (uses its final program)")->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--gt,--annotation", annotation_path, "scene annotation (ground-truth program, relations, zones)")->check(CLI::ExistingFile);
    eval_cmd->add_option("--suite", suite_path, "suite file; with --runs scores every scene")->check(CLI::ExistingFile);
    eval_cmd->add_option("--runs", runs_root, "directory holding one run directory per suite scene");
    eval_cmd->add_option("--out", out_path, "write metrics JSON here (stdout then shows a table)");
    std::vector<fs::path> exec_scripts;
    fs::path blender;
    eval_cmd->add_option("--exec", exec_scripts, "scripts to execute with Blender for the execution rate");
    eval_cmd->add_option("--blender", blender, "Blender executable");

    car::AblationOptions abl;
    fs::path ablate_out;
    bool no_critic = false;
    auto* ablate_cmd = app.add_subcommand("ablate", "loop budget and memory ablation over a suite");
    ablate_cmd->add_option("--suite", suite_path, "suite file")->required()->check(CLI::ExistingFile);
    ablate_cmd->add_option("--out", ablate_out, "output directory")->required();
    ablate_cmd->add_option("--seeds", abl.seeds, "seeds per scene and arm")->capture_default_str();
    ablate_cmd->add_option("--jobs", abl.jobs, "parallel runs")->capture_default_str();
    ablate_cmd->add_flag("--provider-critic", no_critic, "use the provider's own Stage 3 critic instead of the simulated one");
    add_run_options(ablate_cmd, run, false);
    add_provider_options(ablate_cmd, prov);

    fs::path labels_path;
    double px_per_m = 50.0;
    auto* preview_cmd = app.add_subcommand("preview", "top-down preview PNG of a program");
    preview_cmd->add_option("program", program_path, "program JSON")->required()->check(CLI::ExistingFile);
    preview_cmd->add_option("--out", out_path, "PNG path")->required();
    preview_cmd->add_option("--labels", labels_path, "16-bit label PNG path (legend JSON next to it)");
    preview_cmd->add_option("--px-per-m", px_per_m, "pixels per meter")->capture_default_str();

    car::EmitOptions emit;
    bool shim = false;
    auto* emit_cmd = app.add_subcommand("emit", "Blender script from a program");
    emit_cmd->add_option("program", program_path, "program JSON")->required()->check(CLI::ExistingFile);
    emit_cmd->add_option("--out", out_path, "script path")->required();
    emit_cmd->add_flag("--shim", shim, "import the runtime shim instead of inlining helpers");
    emit_cmd->add_option("--texture-root", emit.texture_root, "directory texture references resolve against");
    emit_cmd->add_option("--asset-root", emit.asset_root, "directory mesh references resolve against");
    emit_cmd->add_flag("--embed-textures", emit.embed_textures, "inline texture bytes");

    fs::path report_path;
    car::CorrectionConfig corr;
    auto* correct_cmd = app.add_subcommand("correct", "placement correction of a program");
    correct_cmd->add_option("program", program_path, "program JSON")->required()->check(CLI::ExistingFile);
    correct_cmd->add_option("--out", out_path, "corrected program path")->required();
    correct_cmd->add_option("--report", report_path, "correction report path");
    correct_cmd->add_option("--grid-step", corr.grid_step, "grid step (m)")->capture_default_str();
    correct_cmd->add_option("--max-radius", corr.max_radius, "search radius (m)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kBadInput;
    }

    try {
        if (*run_cmd) {
            const auto pc = resolve_provider(prov);
            auto provider = make_provider(pc);
            auto cfg = pipeline_config(run);
            cfg.retries = pc.retries;
            return report_state(car::Pipeline(cfg, *provider).run(), cfg.run_dir);
        }
        if (*stage_cmd) {
            const auto saved = car::json::parse(car::read_text(run.out / "config.json"));
            car::PipelineConfig cfg;
            cfg.scene_id = saved.at("scene_id").get<std::string>();
            cfg.image = saved.at("image").get<std::string>();
            cfg.prompts_dir = saved.value("prompts_dir", "");
            cfg.asset_root = saved.value("asset_root", "");
            cfg.loop.t_max = saved.value("t_max", 5);
            cfg.loop.s_star = saved.value("s_star", 8.5);
            cfg.no_memory = saved.value("no_memory", false);
            cfg.correction.grid_step = saved.value("grid_step", 0.05);
            cfg.correction.max_radius = saved.value("max_radius", 1.5);
            cfg.salience_threshold = saved.value("salience_threshold", 0.5);
            cfg.shim = saved.value("shim", "") == "shim_import" ? car::ShimMode::shim_import : car::ShimMode::self_contained;
            cfg.run_dir = run.out;
            const auto pc = resolve_provider(prov);
            cfg.retries = pc.retries;
            auto provider = make_provider(pc);
            return report_state(car::Pipeline(cfg, *provider).replay(stage_n, only), cfg.run_dir);
        }
        if (*eval_cmd) {
            car::json result;
            if (!suite_path.empty()) {
                if (runs_root.empty()) throw car::ParseError("eval --suite needs --runs");
                const auto suite = car::load_suite(suite_path);
                result = car::json::object();
                for (const auto& sc : suite.scenes)
                    result[sc.id] = car::evaluate_run(runs_root / sc.id, car::load_annotation(sc.annotation));
            } else {
                if (annotation_path.empty()) throw car::ParseError("eval needs --annotation");
                if (program_path.empty() == run.out.empty()) throw car::ParseError("eval needs exactly one of --program or --run");
                const auto a = car::load_annotation(annotation_path);
                if (!run.out.empty()) {
                    result = car::evaluate_run(run.out, a);
                } else {
                    result = car::to_json(car::evaluate(load_program(program_path), a));
                }
                if (!exec_scripts.empty()) {
                    const auto ex = car::execution_rate(exec_scripts, blender);
                    result["exec_ok"] = ex.available ? car::json(ex.rate >= 1.0) : car::json("unavailable");
                    if (ex.available) result["exec_rate"] = ex.rate;
                }
            }
            if (!out_path.empty()) car::write_text(out_path, car::canonical_dump(result));
            if (!suite_path.empty())
                std::cout << suite_csv(result);
            else if (!out_path.empty())
                std::cout << metrics_table(result);
            else
                std::cout << car::canonical_dump(result);
            return kOk;
        }
        if (*ablate_cmd) {
            const auto pc = resolve_provider(prov);
            const auto suite = car::load_suite(suite_path);
            auto cfg = pipeline_config(run);
            cfg.retries = pc.retries;
            abl.noisy_critic = !no_critic;
            const auto result = car::run_ablation(suite, cfg, [&] { return make_provider(pc); }, ablate_out, abl);
            car::write_text(ablate_out / "ablation.json", car::canonical_dump(result));
            const std::string csv = car::ablation_csv(result);
            car::write_text(ablate_out / "ablation.csv", csv);
            std::cout << csv;
            return kOk;
        }
        if (*preview_cmd) {
            car::write_preview(car::render_preview(load_program(program_path), px_per_m), out_path, labels_path);
            return kOk;
        }
        if (*emit_cmd) {
            emit.mode = shim ? car::ShimMode::shim_import : car::ShimMode::self_contained;
            emit.script_dir = out_path.parent_path().empty() ? fs::path(".") : out_path.parent_path();
            car::write_text(out_path, car::emit_blender_script(load_program(program_path), emit));
            return kOk;
        }
        if (*correct_cmd) {
            corr.check();
            const auto [fixed, report] = car::correct_placements(load_program(program_path), corr);
            car::write_text(out_path, car::serialize(fixed));
            if (!report_path.empty()) car::write_text(report_path, car::canonical_dump(car::to_json(report)));
            std::cout << report.entries.size() << " object(s) moved, " << report.unresolved.size() << " unresolved\n";
            return report.unresolved.empty() ? kOk : kStageFailed;
        }
    } catch (const car::ConfigError& e) {
        std::cerr << "car: configuration: " << e.what() << "\n";
        return kProviderConfig;
    } catch (const car::ParseError& e) {
        std::cerr << "car: " << e.what() << "\n";
        return kBadInput;
    } catch (const car::LoadError& e) {
        std::cerr << "car: " << e.what() << "\n";
        return kBadInput;
    } catch (const car::json::exception& e) {
        std::cerr << "car: " << e.what() << "\n";
        return kBadInput;
    } catch (const car::Error& e) {
        std::cerr << "car: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "car: internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
