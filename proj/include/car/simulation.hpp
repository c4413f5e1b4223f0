#pragma once

// Offline stand-in for a layout critic. The simulated critic scores a layout
// by its IoU against a known target plus noise, reports displaced objects
// (mixed with spurious issues that sanitization must remove), and revises by
// moving the reported objects part of the way toward their targets.

#include <random>
#include <string>

#include "car/metrics.hpp"
#include "car/providers.hpp"
#include "car/refine_loop.hpp"

namespace car {

struct NoisyCriticConfig {
    double score_noise = 0.3;
    double displacement_threshold = 0.08;
    double step = 0.6;            // fraction of the remaining offset removed per revision
    double move_noise = 0.03;
    double spurious_unknown = 0.5;  // chance per critique of an issue naming a nonexistent id
    double spurious_arch = 0.3;     // chance per critique of an issue asking to move a wall
    double raster_cell = 0.02;
};

namespace detail {

inline SceneProgram restrict_to(const SceneProgram& target, const SceneProgram& present) {
    SceneProgram out = target;
    std::erase_if(out.statements, [&](const Statement& s) { return is_object(s) && !find_object(present, *object_id(s)); });
    return out;
}

}  // namespace detail

/// Critic and reviser answering stage3_critique and stage3_revise requests;
/// any other stage is forwarded to `fallback` when given.
class NoisyCritic final : public Provider {
public:
    NoisyCritic(SceneProgram target, std::uint64_t seed, NoisyCriticConfig cfg = {}, Provider* fallback = nullptr)
        : target_(std::move(target)), rng_(seed), cfg_(cfg), fallback_(fallback) {}

    std::string id() const override { return "noisy-critic"; }

    std::string complete(const ProviderRequest& request) override {
        if (request.stage_tag == "stage3_critique") return critique(program_from_json(request.attachments.at("program")));
        if (request.stage_tag == "stage3_revise")
            return revise(program_from_json(request.attachments.at("program")), request.attachments.at("issues"));
        if (fallback_) return fallback_->complete(request);
        throw TransportError("noisy critic cannot answer " + request.stage_tag);
    }

private:
    std::string critique(const SceneProgram& p) {
        std::normal_distribution<double> noise(0.0, cfg_.score_noise);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        MetricsConfig mc;
        mc.raster_cell = cfg_.raster_cell;
        const double iou = layout_iou(p, detail::restrict_to(target_, p), mc);
        const double score = std::clamp(10.0 * iou + noise(rng_), 0.0, 10.0);
        json issues = json::array();
        for (const auto* s : objects_of(p)) {
            const Statement* t = find_object(target_, *object_id(*s));
            if (!t) continue;
            if (norm(object_pose(*s).position.xy() - object_pose(*t).position.xy()) > cfg_.displacement_threshold)
                issues.push_back({{"kind", "relation_error"}, {"subjects", {*object_id(*s)}}, {"note", "displaced"}});
        }
        if (coin(rng_) < cfg_.spurious_unknown)
            issues.push_back({{"kind", "overlap"}, {"subjects", {"ghost_" + std::to_string(calls_)}}, {"note", "spurious"}});
        if (coin(rng_) < cfg_.spurious_arch && !p.shell.walls.empty())
            issues.push_back({{"kind", "boundary_violation"}, {"subjects", {p.shell.walls.front().id}}, {"note", "move wall"}});
        ++calls_;
        return json{{"score", score}, {"issues", issues}}.dump();
    }

    std::string revise(const SceneProgram& p, const json& issues) {
        std::normal_distribution<double> noise(0.0, cfg_.move_noise);
        json edits = json::array();
        std::set<std::string> moved;
        for (const auto& issue : issues)
            for (const auto& subject : issue.at("subjects")) {
                const std::string id = subject.get<std::string>();
                const Statement* s = find_object(p, id);
                const Statement* t = find_object(target_, id);
                if (!s || !t || !moved.insert(id).second) continue;
                const Vec3 cur = object_pose(*s).position;
                const Vec3 goal = object_pose(*t).position;
                const Vec3 next{cur.x + cfg_.step * (goal.x - cur.x) + noise(rng_),
                                cur.y + cfg_.step * (goal.y - cur.y) + noise(rng_), cur.z};
                edits.push_back({{"op", "move"}, {"id", id}, {"position", to_json_vec(next)}});
            }
        return json{{"edits", edits}}.dump();
    }

    SceneProgram target_;
    std::mt19937_64 rng_;
    NoisyCriticConfig cfg_;
    Provider* fallback_;
    int calls_ = 0;
};

/// Graph holding every object of `p` as a major node and its walls as
/// architecture; enough context to sanitize critiques of `p`.
inline SceneGraph graph_of(const SceneProgram& p) {
    SceneGraph g;
    for (const auto& w : p.shell.walls) g.nodes[w.id] = {NodeKind::arch, "wall", json::object(), json::object()};
    for (const auto* s : objects_of(p))
        g.nodes[*object_id(*s)] = {NodeKind::major, object_category(*s), json::object(), json::object()};
    return g;
}

struct SimScene {
    SceneProgram target;
    SceneProgram initial;
};

/// Seeded room with 5 to 9 non-overlapping boxes (the target) and a copy with
/// every box displaced (the initial layout).
inline SimScene make_sim_scene(std::uint64_t seed, double displacement = 0.35) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double w = 4.0 + 2.0 * uni(rng), d = 3.5 + 2.0 * uni(rng);
    SimScene sc;
    sc.target.shell = rectangular_shell(w, d);
    const int n = 5 + static_cast<int>(uni(rng) * 5.0);
    static constexpr std::array<const char*, 6> kCats = {"bed", "desk", "wardrobe", "sofa", "table", "cabinet"};
    for (int i = 0, tries = 0; i < n && tries < 2000; ++tries) {
        Proxy p;
        p.id = "obj_" + std::to_string(i);
        p.category = kCats[static_cast<std::size_t>(i) % kCats.size()];
        p.size = {0.5 + 1.0 * uni(rng), 0.5 + 1.0 * uni(rng), 0.4 + 1.2 * uni(rng)};
        p.pose.yaw = normalize_yaw(std::numbers::pi / 2.0 * std::floor(uni(rng) * 4.0));
        p.pose.position = {p.size.x / 2 + (w - p.size.x) * uni(rng), p.size.y / 2 + (d - p.size.y) * uni(rng), 0.0};
        const Statement st = p;
        const Footprint f = footprint_of(st);
        if (!contained_in_room(f, sc.target.shell)) continue;
        bool clash = false;
        for (const auto* o : objects_of(sc.target)) clash = clash || overlap_area(f, footprint_of(*o)) > 0.0;
        if (clash) continue;
        sc.target.statements.push_back(st);
        ++i;
    }
    std::normal_distribution<double> jitter(0.0, displacement);
    sc.initial = sc.target;
    for (auto& s : sc.initial.statements) {
        if (!is_object(s)) continue;
        Pose& pose = object_pose(s);
        pose.position = {std::clamp(pose.position.x + jitter(rng), 0.0, w), std::clamp(pose.position.y + jitter(rng), 0.0, d),
                         pose.position.z};
    }
    return sc;
}

}  // namespace car
