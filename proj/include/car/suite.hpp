#pragma once

// Benchmark suites: scenes with annotations, per-run evaluation and the
// loop-budget / memory ablation driver shared by the CLI and the tests.

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "car/metrics.hpp"
#include "car/pipeline.hpp"
#include "car/simulation.hpp"

namespace car {

struct SuiteScene {
    std::string id;
    std::filesystem::path image;
    std::filesystem::path annotation;
};

struct Suite {
    std::filesystem::path root;
    std::vector<SuiteScene> scenes;
};

/// {"scenes": [{"id", "image", "annotation"}]}, paths relative to the file.
inline Suite load_suite(const std::filesystem::path& path) {
    Suite s;
    s.root = path.parent_path();
    try {
        const json j = json::parse(read_text(path));
        for (const auto& e : j.at("scenes"))
            s.scenes.push_back({e.at("id").get<std::string>(), s.root / e.at("image").get<std::string>(),
                                s.root / e.at("annotation").get<std::string>()});
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (s.scenes.empty()) throw ParseError(path.string() + ": no scenes");
    return s;
}

inline Annotation load_annotation(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return annotation_from_json(j, path.parent_path());
}

inline constexpr const char* kFinalProgram = "out/final_program.json";

/// Metrics of one finished run directory. A run without a final program
/// reports completion=false and no rates.
inline json evaluate_run(const std::filesystem::path& run_dir, const Annotation& a, const MetricsConfig& cfg = {}) {
    const auto final_path = run_dir / kFinalProgram;
    if (!std::filesystem::exists(final_path)) return {{"completion", false}};
    json j = to_json(evaluate(parse(read_text(final_path)), a, cfg));
    j.erase("evidence");
    return j;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationArm {
    std::string name;
    int t_max = 5;
    bool no_memory = false;
};

inline std::vector<AblationArm> default_arms() {
    return {{"loop_t0", 0, false}, {"loop_t3", 3, false}, {"loop_t5", 5, false}, {"loop_t10", 10, false},
            {"no_memory", 5, true}};
}

struct AblationOptions {
    std::vector<AblationArm> arms = default_arms();
    int seeds = 1;
    int jobs = 1;
    bool noisy_critic = true;  // Stage 3 critic simulated against the annotation
    NoisyCriticConfig critic{};
};

/// Provider answering every stage of one (scene, seed) run.
using ProviderFactory = std::function<std::unique_ptr<Provider>()>;

namespace detail {

inline std::uint64_t run_seed(const std::string& arm, const std::string& scene, int seed) {
    return fnv1a(arm + "/" + scene + "/" + std::to_string(seed));
}

// Owns the scripted base provider and the critic wrapping it.
class StackedProvider final : public Provider {
public:
    StackedProvider(std::unique_ptr<Provider> base, std::unique_ptr<Provider> top)
        : base_(std::move(base)), top_(std::move(top)) {}
    std::string id() const override { return top_->id(); }
    std::string complete(const ProviderRequest& r) override { return top_->complete(r); }

private:
    std::unique_ptr<Provider> base_;
    std::unique_ptr<Provider> top_;
};

}  // namespace detail

/// Runs every arm on every scene and seed under `out_dir/<arm>/<scene>_s<k>`
/// and returns per-run rows plus per-arm means over completed runs.
inline json run_ablation(const Suite& suite, const PipelineConfig& base, const ProviderFactory& make_provider,
                         const std::filesystem::path& out_dir, const AblationOptions& opt = {}) {
    struct Job {
        AblationArm arm;
        SuiteScene scene;
        int seed;
    };
    std::vector<Job> jobs;
    for (const auto& arm : opt.arms)
        for (const auto& sc : suite.scenes)
            for (int k = 0; k < opt.seeds; ++k) jobs.push_back({arm, sc, k});

    std::vector<Annotation> annotations;
    for (const auto& sc : suite.scenes) annotations.push_back(load_annotation(sc.annotation));
    auto annotation_of = [&](const std::string& id) -> const Annotation& {
        for (std::size_t i = 0; i < suite.scenes.size(); ++i)
            if (suite.scenes[i].id == id) return annotations[i];
        throw ConfigError("unknown scene " + id);
    };

    std::vector<json> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::string first_error;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const Job& job = jobs[i];
            try {
                PipelineConfig cfg = base;
                cfg.scene_id = job.scene.id;
                cfg.image = job.scene.image;
                cfg.loop.t_max = job.arm.t_max;
                cfg.no_memory = job.arm.no_memory;
                cfg.run_dir = out_dir / job.arm.name / (job.scene.id + "_s" + std::to_string(job.seed));
                std::filesystem::remove_all(cfg.run_dir);
                std::unique_ptr<Provider> provider = make_provider();
                if (opt.noisy_critic) {
                    auto critic = std::make_unique<NoisyCritic>(annotation_of(job.scene.id).gt,
                                                                detail::run_seed(job.arm.name, job.scene.id, job.seed),
                                                                opt.critic, provider.get());
                    provider = std::make_unique<detail::StackedProvider>(std::move(provider), std::move(critic));
                }
                const RunState st = Pipeline(cfg, *provider).run();
                json row = evaluate_run(cfg.run_dir, annotation_of(job.scene.id));
                row["arm"] = job.arm.name;
                row["scene"] = job.scene.id;
                row["seed"] = job.seed;
                if (const auto f = st.failed_stage()) row["failed_stage"] = *f;
                rows[i] = std::move(row);
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (first_error.empty()) first_error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < std::max(1, opt.jobs); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (!first_error.empty()) throw ConfigError("ablation: " + first_error);

    json arms = json::array();
    for (const auto& arm : opt.arms) {
        json means = json::object();
        std::size_t runs = 0, completed = 0;
        for (const auto& r : rows) {
            if (r.at("arm") != arm.name) continue;
            ++runs;
            if (!r.value("completion", false)) continue;
            ++completed;
            for (auto col : kRateColumns) means[std::string(col)] = means.value(std::string(col), 0.0) + r.at(std::string(col)).get<double>();
        }
        for (auto& [k, v] : means.items()) v = v.get<double>() / static_cast<double>(completed);
        means["completion"] = runs ? static_cast<double>(completed) / static_cast<double>(runs) : 0.0;
        arms.push_back({{"arm", arm.name}, {"t_max", arm.t_max}, {"no_memory", arm.no_memory}, {"runs", runs}, {"means", means}});
    }
    return {{"arms", arms}, {"runs", rows}};
}

/// CSV with one row per arm, columns in kRateColumns order.
inline std::string ablation_csv(const json& result) {
    std::string out = "arm,t_max,no_memory,runs,completion";
    for (auto col : kRateColumns) out += "," + std::string(col);
    out += "\n";
    for (const auto& a : result.at("arms")) {
        const json& m = a.at("means");
        out += a.at("arm").get<std::string>() + "," + std::to_string(a.at("t_max").get<int>()) + "," +
               (a.at("no_memory").get<bool>() ? "1" : "0") + "," + std::to_string(a.at("runs").get<std::size_t>()) + "," +
               format_number(m.at("completion").get<double>());
        for (auto col : kRateColumns) out += "," + (m.contains(std::string(col)) ? format_number(m[std::string(col)].get<double>()) : "");
        out += "\n";
    }
    return out;
}

}  // namespace car
