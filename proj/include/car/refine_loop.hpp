#pragma once

// Render, critique, revise. The critic scores the rendered layout and lists
// issues; issues are sanitized against the scene description and graph, and
// the reviser answers with structured edits checked by the IR validator.

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "car/core_model.hpp"
#include "car/program.hpp"
#include "car/providers.hpp"

namespace car {

inline constexpr std::array<std::string_view, 6> kIssueKinds = {
    "missing_object", "overlap", "boundary_violation", "relation_error", "extra_object", "scale_error"};
inline constexpr const char* kUnknownSubject = "unknown";

struct Issue {
    std::string kind;
    std::vector<std::string> subjects;
    std::string note;
    friend bool operator==(const Issue&, const Issue&) = default;
};

struct Critique {
    std::vector<Issue> issues;
    double score = 0.0;
    friend bool operator==(const Critique&, const Critique&) = default;
};

struct DroppedIssue {
    Issue issue;
    std::string reason;
};

struct LoopConfig {
    int t_max = 5;
    double s_star = 8.5;

    void check() const {
        if (t_max < 0) throw ConfigError("loop t_max must be non-negative");
    }
};

inline json to_json(const Issue& i) { return {{"kind", i.kind}, {"subjects", i.subjects}, {"note", i.note}}; }

inline json to_json(const Critique& c) {
    json issues = json::array();
    for (const auto& i : c.issues) issues.push_back(to_json(i));
    return {{"score", c.score}, {"issues", issues}};
}

/// Expects a payload already validated against the layout_feedback schema.
inline Critique critique_from_json(const json& j) {
    Critique c;
    c.score = j.at("score").get<double>();
    if (!(c.score >= 0.0 && c.score <= 10.0)) throw ParseError("critique score outside [0,10]");
    for (const auto& i : j.at("issues"))
        c.issues.push_back({i.at("kind").get<std::string>(), i.at("subjects").get<std::vector<std::string>>(),
                            i.value("note", "")});
    return c;
}

struct SanitizeContext {
    const SceneDescription* description = nullptr;
    const SceneGraph* graph = nullptr;
    const MinorSidecar* sidecar = nullptr;
};

struct SanitizeResult {
    Critique critique;
    std::vector<DroppedIssue> dropped;
};

namespace detail {

inline bool known_id(const SanitizeContext& ctx, const std::string& id) {
    if (ctx.description && (ctx.description->find(id) || ctx.description->find_arch(id))) return true;
    if (ctx.graph && ctx.graph->has(id)) return true;
    if (ctx.sidecar)
        for (const auto& m : ctx.sidecar->entries)
            if (m.id == id) return true;
    return false;
}

inline bool is_arch(const SanitizeContext& ctx, const std::string& id) {
    return (ctx.graph && ctx.graph->is_arch(id)) || (ctx.description && ctx.description->find_arch(id));
}

inline std::optional<std::string> parent_in(const SanitizeContext& ctx, const std::string& id) {
    if (ctx.description)
        if (const auto* o = ctx.description->find(id); o && o->parent) return o->parent;
    if (ctx.graph)
        for (const auto& e : ctx.graph->edges)
            if (e.relation == Relation::child_of && e.src == id) return e.dst;
    if (ctx.sidecar)
        for (const auto& m : ctx.sidecar->entries)
            if (m.id == id && m.surface_bound) return m.parent_surface;
    return std::nullopt;
}

inline bool ancestor_of(const SanitizeContext& ctx, const std::string& anc, std::string node) {
    for (int guard = 0; guard < 64; ++guard) {
        const auto p = parent_in(ctx, node);
        if (!p) return false;
        if (*p == anc) return true;
        node = *p;
    }
    return false;
}

}  // namespace detail

/// Drops issues that name unknown ids, ask to change architecture, or treat a
/// support pair as a conflict. Surviving issues are unchanged.
inline SanitizeResult sanitize(const Critique& critique, const SanitizeContext& ctx) {
    SanitizeResult out;
    out.critique.score = critique.score;
    for (const auto& issue : critique.issues) {
        std::string reason;
        for (const auto& s : issue.subjects)
            if (s != kUnknownSubject && !detail::known_id(ctx, s)) {
                reason = "unknown id '" + s + "'";
                break;
            }
        if (reason.empty() && !issue.subjects.empty() && detail::is_arch(ctx, issue.subjects.front()))
            reason = "architectural element '" + issue.subjects.front() + "' is fixed";
        if (reason.empty() && (issue.kind == "overlap" || issue.kind == "relation_error"))
            for (std::size_t i = 0; i < issue.subjects.size() && reason.empty(); ++i)
                for (std::size_t j = 0; j < issue.subjects.size(); ++j)
                    if (i != j && detail::ancestor_of(ctx, issue.subjects[j], issue.subjects[i])) {
                        reason = "contradicts support of '" + issue.subjects[i] + "' on '" + issue.subjects[j] + "'";
                        break;
                    }
        if (reason.empty())
            out.critique.issues.push_back(issue);
        else
            out.dropped.push_back({issue, reason});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structured edits

/// Applies a validated layout_edits payload. Throws on edits that name
/// missing objects or produce an invalid program.
inline SceneProgram apply_edits(const SceneProgram& program, const json& edits) {
    SceneProgram out = program;
    for (const auto& e : edits.at("edits")) {
        const std::string op = e.at("op").get<std::string>();
        const std::string id = e.at("id").get<std::string>();
        Statement* s = find_object(out, id);
        if (op != "add" && !s) throw LinkError("edit " + op + ": no object '" + id + "'");
        auto vec3 = [&](const char* key) { return detail::Reader::to_vec3(e.at(key), std::string("/edits/") + key); };
        if (op == "move") {
            Pose& pose = object_pose(*s);
            const Vec3 target = vec3("position");
            const Vec3 delta = target - pose.position;
            pose.position = target;
            for (const auto* other : objects_of(program))
                if (object_parent(*other) == id) {
                    Pose& cp = object_pose(*find_object(out, *object_id(*other)));
                    cp.position = cp.position + Vec3{delta.x, delta.y, 0.0};
                }
        } else if (op == "rotate") {
            object_pose(*s).yaw = normalize_yaw(e.at("yaw").get<double>());
        } else if (op == "resize") {
            auto* proxy = std::get_if<Proxy>(s);
            if (!proxy) throw LinkError("edit resize: '" + id + "' is not a proxy");
            proxy->size = vec3("size");
        } else if (op == "add") {
            if (s) throw ConflictError("edit add: '" + id + "' already exists");
            Proxy p;
            p.id = id;
            p.category = e.at("category").get<std::string>();
            p.pose.position = vec3("position");
            p.pose.yaw = normalize_yaw(e.value("yaw", 0.0));
            p.size = vec3("size");
            if (e.contains("placement_type")) {
                const auto pt = placement_from_string(e["placement_type"].get<std::string>());
                if (!pt) throw ParseError("edit add: unknown placement type");
                p.placement_type = *pt;
            }
            if (e.contains("parent")) p.parent = e["parent"].get<std::string>();
            out.statements.emplace_back(std::move(p));
        } else if (op == "remove") {
            for (const auto* other : objects_of(out))
                if (object_parent(*other) == id) throw LinkError("edit remove: '" + id + "' still supports objects");
            std::erase_if(out.statements, [&](const Statement& st) { return is_object(st) && *object_id(st) == id; });
        } else {
            throw ParseError("unknown edit op '" + op + "'");
        }
    }
    validate(out);
    return out;
}

// ---------------------------------------------------------------------------
// Loop

struct LoopIteration {
    int t = 0;
    std::string render;
    Critique critique;
    Critique sanitized;
    std::vector<DroppedIssue> dropped;
    std::string program_hash;  // program that was rendered and critiqued
    double score = 0.0;
    std::optional<std::string> revised_hash;
    std::optional<std::string> revision_error;
};

struct LoopTrace {
    std::vector<LoopIteration> iterations;
    std::string stop_reason;  // threshold | t_max
    std::string final_hash;
};

inline json to_json(const LoopTrace& trace) {
    json its = json::array();
    for (const auto& it : trace.iterations) {
        json dropped = json::array();
        for (const auto& d : it.dropped) dropped.push_back({{"issue", to_json(d.issue)}, {"reason", d.reason}});
        json j{{"t", it.t},
               {"render", it.render},
               {"critique", to_json(it.critique)},
               {"sanitized", to_json(it.sanitized)},
               {"dropped", dropped},
               {"program_hash", it.program_hash},
               {"score", it.score}};
        if (it.revised_hash) j["revised_hash"] = *it.revised_hash;
        if (it.revision_error) j["revision_error"] = *it.revision_error;
        its.push_back(std::move(j));
    }
    return {{"iterations", its}, {"stop_reason", trace.stop_reason}, {"final_hash", trace.final_hash}};
}

struct LoopError : Error {
    LoopError(const std::string& what, LoopTrace t) : Error(what), trace(std::move(t)) {}
    LoopTrace trace;
};

/// Produces a reference to a top-down render of the program for iteration t.
using Renderer = std::function<std::string(const SceneProgram&, int t)>;

struct LoopContext {
    std::string scene_id;
    std::vector<std::string> images;  // the input image, passed to the critic
    SanitizeContext sanitize;
    const PromptLibrary* prompts = nullptr;
    int retries = kDefaultRetries;
};

namespace detail {

inline std::string loop_prompt(const LoopContext& ctx, const std::string& tag, const std::map<std::string, std::string>& slots) {
    if (!ctx.prompts) {
        std::string text = tag;
        for (const auto& [k, v] : slots) text += "\n" + k + ": " + v;
        return text;
    }
    return ctx.prompts->render(tag, slots);
}

}  // namespace detail

inline std::pair<SceneProgram, LoopTrace> run_loop(const SceneProgram& initial, const LoopContext& ctx,
                                                   const LoopConfig& cfg, const Renderer& renderer, Provider& provider) {
    cfg.check();
    SceneProgram current = initial;
    LoopTrace trace;
    trace.stop_reason = "t_max";
    for (int t = 1; t <= cfg.t_max; ++t) {
        LoopIteration it;
        it.t = t;
        it.program_hash = program_hash(current);
        try {
            it.render = renderer(current, t);
        } catch (const std::exception& e) {
            trace.final_hash = program_hash(current);
            throw LoopError(std::string("stage3: render failed at iteration ") + std::to_string(t) + ": " + e.what(),
                            trace);
        }
        const std::string program_text = to_json(current).dump();

        ProviderRequest creq;
        creq.stage_tag = "stage3_critique";
        creq.scene_id = ctx.scene_id;
        creq.iteration = t;
        creq.response_schema = "layout_feedback";
        creq.images = ctx.images;
        creq.images.push_back(it.render);
        creq.attachments = {{"program", to_json(current)}};
        creq.prompt = detail::loop_prompt(ctx, "stage3_critique", {{"program", program_text}, {"iteration", std::to_string(t)}});
        it.critique = critique_from_json(call(provider, creq, ctx.retries).payload);
        it.score = it.critique.score;
        auto clean = sanitize(it.critique, ctx.sanitize);
        it.sanitized = clean.critique;
        it.dropped = std::move(clean.dropped);

        if (it.score >= cfg.s_star) {
            trace.iterations.push_back(std::move(it));
            trace.stop_reason = "threshold";
            break;
        }

        ProviderRequest rreq;
        rreq.stage_tag = "stage3_revise";
        rreq.scene_id = ctx.scene_id;
        rreq.iteration = t;
        rreq.response_schema = "layout_edits";
        rreq.attachments = {{"program", to_json(current)}, {"issues", to_json(it.sanitized)["issues"]}};
        rreq.prompt = detail::loop_prompt(
            ctx, "stage3_revise",
            {{"program", program_text}, {"issues", to_json(it.sanitized)["issues"].dump()}, {"iteration", std::to_string(t)}});
        try {
            SceneProgram revised = apply_edits(current, call(provider, rreq, ctx.retries).payload);
            it.revised_hash = program_hash(revised);
            current = std::move(revised);
        } catch (const TransportError&) {
            throw;
        } catch (const std::exception& e) {
            it.revision_error = e.what();
        }
        trace.iterations.push_back(std::move(it));
    }
    trace.final_hash = program_hash(current);
    return {std::move(current), std::move(trace)};
}

}  // namespace car
