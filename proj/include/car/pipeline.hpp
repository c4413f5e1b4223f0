#pragma once

// Stage orchestrator: runs Stages 1-6 and 8-10 over one image, reading each
// stage's inputs from its memory view and appending its outputs. Stage 7 does
// not exist; the numbering keeps the original stage labels.
//
// Run directory:
//   memory/            persisted store (index.json + entry files)
//   previews/          stage 3 iteration renders, stage 4 and final previews
//   programs/          program snapshot per stage
//   textures/          stage 9 texture images
//   out/scene.blend.py, out/final_program.json
//   stage3_trace.json, stage10_correction.json, config.json, report.json

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "car/assets.hpp"
#include "car/codegen.hpp"
#include "car/core_model.hpp"
#include "car/image.hpp"
#include "car/memory.hpp"
#include "car/passes.hpp"
#include "car/providers.hpp"
#include "car/refine_loop.hpp"
#include "car/solver.hpp"

namespace car {

inline constexpr std::array<int, 9> kStages = {1, 2, 3, 4, 5, 6, 8, 9, 10};

enum class StageStatus { pending, ok, failed, skipped };

inline std::string to_string(StageStatus s) {
    switch (s) {
        case StageStatus::pending: return "pending";
        case StageStatus::ok: return "ok";
        case StageStatus::failed: return "failed";
        case StageStatus::skipped: return "skipped";
    }
    return "pending";
}

inline std::optional<StageStatus> stage_status_from_string(std::string_view s) {
    if (s == "pending") return StageStatus::pending;
    if (s == "ok") return StageStatus::ok;
    if (s == "failed") return StageStatus::failed;
    if (s == "skipped") return StageStatus::skipped;
    return std::nullopt;
}

struct StageRecord {
    StageStatus status = StageStatus::pending;
    std::string error_kind;
    std::string error;
    std::vector<std::string> warnings;
    int provider_attempts = 0;
};

struct RunState {
    std::string scene_id;
    std::map<int, StageRecord> stages;
    std::map<std::string, std::string> artifacts;  // name -> path relative to the run directory
    json config = json::object();

    bool completed() const {
        return std::all_of(kStages.begin(), kStages.end(), [&](int s) {
            const auto it = stages.find(s);
            return it != stages.end() && it->second.status == StageStatus::ok;
        });
    }

    std::vector<int> completed_stages() const {
        std::vector<int> out;
        for (const auto& [s, r] : stages)
            if (r.status == StageStatus::ok) out.push_back(s);
        return out;
    }

    std::optional<int> failed_stage() const {
        for (const auto& [s, r] : stages)
            if (r.status == StageStatus::failed) return s;
        return std::nullopt;
    }
};

inline json to_json(const RunState& r) {
    json stages = json::object();
    for (const auto& [s, rec] : r.stages) {
        json j{{"status", to_string(rec.status)}, {"warnings", rec.warnings}, {"provider_attempts", rec.provider_attempts}};
        if (!rec.error.empty()) {
            j["error_kind"] = rec.error_kind;
            j["error"] = rec.error;
        }
        stages[std::to_string(s)] = std::move(j);
    }
    return {{"scene_id", r.scene_id},
            {"completed", r.completed()},
            {"completed_stages", r.completed_stages()},
            {"stages", stages},
            {"artifacts", r.artifacts},
            {"config", r.config}};
}

inline RunState run_state_from_json(const json& j) {
    RunState r;
    try {
        r.scene_id = j.at("scene_id").get<std::string>();
        for (const auto& [k, v] : j.at("stages").items()) {
            StageRecord rec;
            const auto st = stage_status_from_string(v.at("status").get<std::string>());
            if (!st) throw ParseError("report: unknown stage status");
            rec.status = *st;
            rec.error_kind = v.value("error_kind", "");
            rec.error = v.value("error", "");
            rec.warnings = v.value("warnings", std::vector<std::string>{});
            rec.provider_attempts = v.value("provider_attempts", 0);
            r.stages[std::stoi(k)] = std::move(rec);
        }
        r.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
        r.config = j.value("config", json::object());
    } catch (const json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Stage 5 records

struct ObjectProfile {
    ObjectId id;
    std::vector<std::string> color;
    std::vector<std::string> material;
    std::string function;
    std::string structure;
    std::vector<std::string> style;
};

struct RoomStyle {
    std::vector<std::string> palette;
    std::vector<std::string> style;
    std::string mood;
    std::string lighting;
};

inline json to_json(const ObjectProfile& p) {
    return {{"id", p.id},           {"color", p.color},         {"material", p.material},
            {"function", p.function}, {"structure", p.structure}, {"style", p.style}};
}

inline json to_json(const RoomStyle& s) {
    return {{"palette", s.palette}, {"style", s.style}, {"mood", s.mood}, {"lighting", s.lighting}};
}

inline ObjectProfile profile_from_json(const json& j) {
    ObjectProfile p;
    p.id = j.at("id").get<std::string>();
    p.color = j.at("color").get<std::vector<std::string>>();
    p.material = j.at("material").get<std::vector<std::string>>();
    p.function = j.at("function").get<std::string>();
    p.structure = j.value("structure", "");
    p.style = j.at("style").get<std::vector<std::string>>();
    return p;
}

inline RoomStyle room_style_from_json(const json& j) {
    RoomStyle s;
    s.palette = j.at("palette").get<std::vector<std::string>>();
    s.style = j.at("style").get<std::vector<std::string>>();
    s.mood = j.value("mood", "");
    s.lighting = j.value("lighting", "");
    return s;
}

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
    std::string scene_id;
    std::filesystem::path image;
    std::filesystem::path run_dir;
    std::filesystem::path prompts_dir;  // empty: plain-text prompts built from the slots
    std::filesystem::path asset_root;   // empty: no retrieval library
    LoopConfig loop;
    bool no_memory = false;
    CorrectionConfig correction;
    SurfaceConfig surfaces;
    double salience_threshold = 0.5;
    int retries = kDefaultRetries;
    ShimMode shim = ShimMode::self_contained;
    double preview_px_per_m = 50.0;
    Vec3 default_minor_size{0.15, 0.15, 0.15};

    /// Everything that influences the outputs, minus the run directory.
    json snapshot() const {
        return {{"scene_id", scene_id},
                {"image", image.generic_string()},
                {"prompts_dir", prompts_dir.generic_string()},
                {"asset_root", asset_root.generic_string()},
                {"t_max", loop.t_max},
                {"s_star", loop.s_star},
                {"no_memory", no_memory},
                {"grid_step", correction.grid_step},
                {"max_radius", correction.max_radius},
                {"salience_threshold", salience_threshold},
                {"retries", retries},
                {"shim", shim == ShimMode::self_contained ? "self_contained" : "shim_import"}};
    }
};

namespace detail {

inline std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const SchemaError*>(&e)) return "schema";
    if (dynamic_cast<const TransportError*>(&e)) return "transport";
    if (dynamic_cast<const LinkError*>(&e)) return "link";
    if (dynamic_cast<const StructuralError*>(&e)) return "structural";
    if (dynamic_cast<const ConflictError*>(&e)) return "conflict";
    if (dynamic_cast<const ParseError*>(&e)) return "parse";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const LoadError*>(&e)) return "load";
    if (dynamic_cast<const EmitError*>(&e)) return "emit";
    if (dynamic_cast<const LoopError*>(&e)) return "loop";
    if (dynamic_cast<const json::exception*>(&e)) return "parse";
    return "internal";
}

// File-name-safe form of a material/texture target.
inline std::string slug(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

inline std::array<std::uint8_t, 3> color_of(std::uint64_t h) {
    return {static_cast<std::uint8_t>(64 + (h & 0x7f)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0x7f)),
            static_cast<std::uint8_t>(64 + ((h >> 16) & 0x7f))};
}

}  // namespace detail

// ---------------------------------------------------------------------------

class Pipeline {
public:
    Pipeline(PipelineConfig cfg, Provider& provider) : cfg_(std::move(cfg)), provider_(provider) {
        if (cfg_.scene_id.empty()) throw ConfigError("pipeline: scene id is empty");
        if (cfg_.run_dir.empty()) throw ConfigError("pipeline: run directory is empty");
        cfg_.loop.check();
        cfg_.correction.check();
        if (!cfg_.prompts_dir.empty()) prompts_.emplace(cfg_.prompts_dir);
    }

    /// Stages 1 to 10 from the image. Throws LoadError when the image is
    /// unreadable; stage failures are recorded in the returned state.
    RunState run() {
        std::string bytes;
        try {
            bytes = read_text(cfg_.image);
        } catch (const LoadError&) {
            throw LoadError("input image not readable: " + cfg_.image.string());
        }
        const auto size = png_size(bytes);
        json image{{"path", cfg_.image.generic_string()}, {"content_hash", hex64(fnv1a(bytes))}};
        if (size) image["size"] = {size->first, size->second};
        memory_ = MemoryStore{};
        memory_ = memory_.append({kImageStage, ArtifactType::image, 0, image, json::object()});
        state_ = RunState{};
        state_.scene_id = cfg_.scene_id;
        state_.config = cfg_.snapshot();
        return execute(kStages.front(), false);
    }

    /// Re-runs stage `from` (and, unless `only`, every later stage) on the
    /// memory persisted in the run directory. Artifacts of stage `from` and
    /// later are discarded first.
    RunState replay(int from, bool only = false) {
        if (std::find(kStages.begin(), kStages.end(), from) == kStages.end())
            throw ConfigError("no stage " + std::to_string(from));
        const MemoryStore loaded = load_memory(cfg_.run_dir / "memory");
        memory_ = MemoryStore{};
        for (std::size_t i = 0; i < loaded.size(); ++i)
            if (loaded[i].stage < from) memory_ = memory_.append(loaded[i]);
        state_ = RunState{};
        const auto report = cfg_.run_dir / "report.json";
        if (std::filesystem::exists(report)) state_ = run_state_from_json(json::parse(read_text(report)));
        state_.scene_id = cfg_.scene_id;
        state_.config = cfg_.snapshot();
        for (int s : kStages)
            if (s >= from) state_.stages[s] = StageRecord{};
        return execute(from, only);
    }

    const MemoryStore& memory() const noexcept { return memory_; }
    const RunState& state() const noexcept { return state_; }
    const PipelineConfig& config() const noexcept { return cfg_; }

private:
    RunState execute(int from, bool only) {
        std::filesystem::create_directories(cfg_.run_dir);
        write_text(cfg_.run_dir / "config.json", canonical_dump(state_.config));
        bool halted = false;
        for (int s : kStages) {
            if (s < from) continue;
            StageRecord& rec = state_.stages[s];
            if (halted || (only && s != from)) {
                rec = StageRecord{};
                rec.status = StageStatus::skipped;
                continue;
            }
            rec = StageRecord{};
            current_ = &rec;
            try {
                run_stage(s);
                rec.status = StageStatus::ok;
            } catch (const std::exception& e) {
                rec.status = StageStatus::failed;
                rec.error_kind = detail::error_kind(e);
                rec.error = "stage" + std::to_string(s) + ": " + e.what();
                halted = true;
            }
            current_ = nullptr;
            save();
        }
        return state_;
    }

    void run_stage(int s) {
        switch (s) {
            case 1: return stage1();
            case 2: return stage2();
            case 3: return stage3();
            case 4: return stage4();
            case 5: return stage5();
            case 6: return stage6();
            case 8: return stage8();
            case 9: return stage9();
            case 10: return stage10();
            default: throw ConfigError("no stage " + std::to_string(s));
        }
    }

    void save() {
        std::filesystem::remove_all(cfg_.run_dir / "memory");
        persist(memory_, cfg_.run_dir / "memory");
        write_text(cfg_.run_dir / "report.json", canonical_dump(to_json(state_)));
    }

    // -- memory helpers ------------------------------------------------------

    std::vector<MemoryEntry> view(int stage) const {
        return cfg_.no_memory ? memory_.ablated_view(stage) : memory_.view(stage);
    }

    static const json* find_payload(const std::vector<MemoryEntry>& v, ArtifactType t) {
        const MemoryEntry* e = pick(v, t);
        return e ? &e->payload : nullptr;
    }

    static const json& need(const std::vector<MemoryEntry>& v, ArtifactType t, int stage) {
        const json* p = find_payload(v, t);
        if (!p) throw StructuralError("memory view of stage " + std::to_string(stage) + " has no " + to_string(t));
        return *p;
    }

    // Latest program of either kind in the view.
    static SceneProgram need_program(const std::vector<MemoryEntry>& v, int stage) {
        const MemoryEntry* best = nullptr;
        for (const auto& e : v)
            if ((e.artifact_type == ArtifactType::layout_program || e.artifact_type == ArtifactType::scene_program) &&
                (!best || e.stage > best->stage))
                best = &e;
        if (!best) throw StructuralError("memory view of stage " + std::to_string(stage) + " has no program");
        return program_from_json(best->payload);
    }

    void put(int stage, ArtifactType t, json payload, json meta = json::object()) {
        memory_ = memory_.append({stage, t, 0, std::move(payload), std::move(meta)});
    }

    void warn(std::string w) {
        if (current_) current_->warnings.push_back(std::move(w));
    }

    void artifact(const std::string& name, const std::filesystem::path& rel, const std::string& text) {
        const auto path = cfg_.run_dir / rel;
        std::filesystem::create_directories(path.parent_path());
        write_text(path, text);
        state_.artifacts[name] = rel.generic_string();
    }

    void snapshot_program(const std::string& name, const SceneProgram& p) {
        artifact(name, std::filesystem::path("programs") / (name + ".json"), serialize(p));
    }

    void preview(const std::string& name, const SceneProgram& p) {
        const auto rel = std::filesystem::path("previews") / (name + ".png");
        std::filesystem::create_directories(cfg_.run_dir / "previews");
        write_preview(render_preview(p, cfg_.preview_px_per_m), cfg_.run_dir / rel,
                      cfg_.run_dir / "previews" / (name + "_labels.png"));
        state_.artifacts["preview_" + name] = rel.generic_string();
    }

    // -- provider helpers ----------------------------------------------------

    static std::vector<std::string> images_in(const std::vector<MemoryEntry>& v) {
        const json* img = find_payload(v, ArtifactType::image);
        if (!img) return {};
        return {img->at("path").get<std::string>()};
    }

    std::string compose(const std::string& tag, const std::map<std::string, std::string>& slots) const {
        if (prompts_) return prompts_->render(tag, slots);
        std::string text = tag;
        for (const auto& [k, v] : slots) text += "\n" + k + ": " + v;
        return text;
    }

    json ask(const std::string& tag, const std::string& schema, const std::map<std::string, std::string>& slots,
             const std::vector<MemoryEntry>& v, json attachments = json::object()) {
        ProviderRequest req;
        req.stage_tag = tag;
        req.scene_id = cfg_.scene_id;
        req.prompt = compose(tag, slots);
        req.images = images_in(v);
        req.attachments = std::move(attachments);
        req.response_schema = schema;
        ProviderResponse resp;
        try {
            resp = call(provider_, req, cfg_.retries);
        } catch (const SchemaError&) {
            if (current_) current_->provider_attempts += cfg_.retries + 1;  // every attempt was rejected
            throw;
        }
        if (current_) current_->provider_attempts += resp.attempts;
        return std::move(resp.payload);
    }

    // -- stages --------------------------------------------------------------

    // Stage 1: structured description of the image.
    void stage1() {
        const auto v = view(1);
        const json payload = ask("stage1", "description", {}, v);
        const SceneDescription desc = description_from_json(payload);
        put(1, ArtifactType::description, to_json(desc));
        artifact("stage1_description", "stage1_description.json", canonical_dump(to_json(desc)));
    }

    // Stage 2: deterministic skeleton, model-completed relations, sidecar.
    void stage2() {
        const auto v = view(2);
        const SceneDescription desc = description_from_json(need(v, ArtifactType::description, 2));
        const Skeleton sk = derive_skeleton(desc);
        const json payload = ask("stage2", "graph_completion",
                                 {{"description", to_json(desc).dump()}, {"skeleton", to_json(sk).dump()}}, v);

        std::vector<GraphEdge> proposed;
        json dropped = json::array();
        for (const auto& e : payload.at("edges")) {
            const auto rel = relation_from_string(e.at("relation").get<std::string>());
            if (!rel) {
                dropped.push_back({{"edge", e}, {"reason", "unknown relation"}});
                continue;
            }
            proposed.push_back({e.at("src").get<std::string>(), e.at("dst").get<std::string>(), *rel, Provenance::vlm});
        }
        GraphCompletion gc = complete_graph(sk, proposed, desc);
        for (const auto& d : gc.dropped) dropped.push_back({{"edge", to_json(d.edge)}, {"reason", d.reason}});
        if (auto why = check_graph(gc.graph); !why.empty()) throw StructuralError("graph: " + why);

        MinorSidecar sidecar = sk.minor;
        if (payload.contains("salience"))
            for (auto& m : sidecar.entries)
                if (payload["salience"].contains(m.id)) m.salience = payload["salience"][m.id].get<double>();
        if (auto why = check_sidecar(sidecar, gc.graph, desc); !why.empty()) throw StructuralError("sidecar: " + why);

        put(2, ArtifactType::graph, {{"graph", to_json(gc.graph)}, {"dropped", dropped}});
        put(2, ArtifactType::sidecar, to_json(sidecar));
        artifact("stage2_graph", "stage2_graph.json", canonical_dump(to_json(gc.graph)));
        artifact("stage2_minors", "stage2_minors.json", canonical_dump(to_json(sidecar)));
    }

    // Stage 3: layout proposal, then the render-critique-revise loop.
    void stage3() {
        const auto v = view(3);
        std::optional<SceneDescription> desc;
        std::optional<SceneGraph> graph;
        std::optional<MinorSidecar> sidecar;
        if (const json* d = find_payload(v, ArtifactType::description)) desc = description_from_json(*d);
        if (const json* g = find_payload(v, ArtifactType::graph)) graph = graph_from_json(g->at("graph"));
        if (const json* s = find_payload(v, ArtifactType::sidecar)) sidecar = sidecar_from_json(*s);

        std::map<std::string, std::string> slots;
        slots["description"] = desc ? to_json(*desc).dump() : "{}";
        slots["graph"] = graph ? to_json(*graph).dump() : "{}";
        SceneProgram layout = program_from_json(ask("stage3", "layout_program", slots, v));
        if (graph) {
            std::erase_if(layout.statements, [&](const Statement& s) {
                if (!is_object(s) || graph->has(*object_id(s))) return false;
                warn("layout object '" + *object_id(s) + "' is not a graph node; dropped");
                return true;
            });
            validate(layout);
        }

        LoopTrace trace;
        trace.stop_reason = "disabled";
        trace.final_hash = program_hash(layout);
        if (cfg_.loop.t_max > 0) {
            LoopContext ctx;
            ctx.scene_id = cfg_.scene_id;
            ctx.images = images_in(v);
            ctx.sanitize.description = desc ? &*desc : nullptr;
            ctx.sanitize.graph = graph ? &*graph : nullptr;
            ctx.sanitize.sidecar = sidecar ? &*sidecar : nullptr;
            ctx.prompts = prompts_ ? &*prompts_ : nullptr;
            ctx.retries = cfg_.retries;
            std::filesystem::create_directories(cfg_.run_dir / "previews");
            Renderer renderer = [&](const SceneProgram& p, int t) {
                const std::string name = "stage3_iter_" + std::to_string(t);
                preview(name, p);
                return (cfg_.run_dir / "previews" / (name + ".png")).string();
            };
            try {
                auto [refined, tr] = run_loop(layout, ctx, cfg_.loop, renderer, provider_);
                layout = std::move(refined);
                trace = std::move(tr);
            } catch (const LoopError& e) {
                write_trace(e.trace);
                throw;
            }
            for (const auto& it : trace.iterations) {
                if (current_) current_->provider_attempts += 1;
                if (it.revision_error) warn("iteration " + std::to_string(it.t) + ": revision rejected: " + *it.revision_error);
            }
        }
        const json trace_json = write_trace(trace);
        put(3, ArtifactType::layout_program, to_json(layout));
        put(3, ArtifactType::critique, trace_json);
        artifact("stage3_layout", "stage3_layout.json", serialize(layout));
    }

    // Renders are recorded relative to the run directory so traces compare
    // equal across run locations.
    json write_trace(const LoopTrace& trace) {
        json j = to_json(trace);
        for (auto& it : j["iterations"])
            it["render"] = std::filesystem::path(it["render"].get<std::string>()).lexically_relative(cfg_.run_dir).generic_string();
        artifact("stage3_trace", "stage3_trace.json", canonical_dump(j));
        return j;
    }

    // Stage 4: wall-mounted objects and salient floor minors appended to the
    // frozen layout.
    void stage4() {
        const auto v = view(4);
        const SceneProgram layout = need_program(v, 4);
        std::vector<DescribedObject> walls;
        std::vector<MinorObject> minors;
        if (const json* d = find_payload(v, ArtifactType::description))
            for (auto& o : wall_subset(description_from_json(*d)))
                if (!find_object(layout, o.id)) walls.push_back(std::move(o));
        if (const json* s = find_payload(v, ArtifactType::sidecar))
            minors = select_salient_minors(sidecar_from_json(*s), cfg_.salience_threshold);

        SceneProgram out = layout;
        if (!walls.empty() || !minors.empty()) {
            json wall_j = json::array(), minor_j = json::array();
            for (const auto& w : walls) wall_j.push_back({{"id", w.id}, {"category", w.category}});
            for (const auto& m : minors) minor_j.push_back({{"id", m.id}, {"category", m.category}});
            const json payload = ask("stage4", "wall_layout",
                                     {{"wall_objects", wall_j.dump()}, {"minors", minor_j.dump()}, {"layout", to_json(layout).dump()}}, v);
            std::vector<PlacedItem> wall_items, minor_items;
            std::set<std::string> placed;
            for (const auto& o : payload.at("objects")) {
                const std::string id = o.at("id").get<std::string>();
                const auto w = std::find_if(walls.begin(), walls.end(), [&](const auto& x) { return x.id == id; });
                const auto m = std::find_if(minors.begin(), minors.end(), [&](const auto& x) { return x.id == id; });
                if ((w == walls.end() && m == minors.end()) || !placed.insert(id).second) {
                    warn("stage4 reply places unexpected object '" + id + "'; ignored");
                    continue;
                }
                PlacedItem item;
                item.id = id;
                item.pose.position = detail::Reader::to_vec3(o.at("position"), "/objects/position");
                item.pose.yaw = o.value("yaw", 0.0);
                if (w != walls.end()) {
                    item.category = w->category;
                    item.size = o.contains("size") ? detail::Reader::to_vec3(o["size"], "/objects/size")
                                                   : w->size_hint.value_or(Vec3{0.6, 0.05, 0.6});
                    item.placement_type = PlacementType::wall;
                    wall_items.push_back(std::move(item));
                } else {
                    item.category = m->category;
                    item.size = o.contains("size") ? detail::Reader::to_vec3(o["size"], "/objects/size")
                                                   : m->size_hint.value_or(Vec3{0.5, 0.5, 0.5});
                    item.placement_type = PlacementType::floor;
                    minor_items.push_back(std::move(item));
                }
            }
            for (const auto& w : walls)
                if (!placed.count(w.id)) warn("wall object '" + w.id + "' was not placed");
            for (const auto& m : minors)
                if (!placed.count(m.id)) warn("minor object '" + m.id + "' was not placed");
            out = append_objects(layout, wall_items, minor_items);
        }
        put(4, ArtifactType::layout_program, to_json(out));
        snapshot_program("stage4_layout", out);
        preview("stage4", out);
    }

    // Stage 5: one appearance profile per placed object plus a room style.
    void stage5() {
        const auto v = view(5);
        const SceneProgram layout = need_program(v, 5);
        const json payload = ask("stage5", "object_profile", {{"layout", to_json(layout).dump()}}, v);
        std::set<std::string> expected, seen;
        for (const auto* s : objects_of(layout)) expected.insert(*object_id(*s));
        json profiles = json::array();
        for (const auto& p : payload.at("profiles")) {
            const ObjectProfile prof = profile_from_json(p);
            if (!expected.count(prof.id)) {
                warn("profile for object '" + prof.id + "' that is not in the layout; dropped");
                continue;
            }
            if (!seen.insert(prof.id).second) throw SchemaError("duplicate profile for '" + prof.id + "'");
            profiles.push_back(to_json(prof));
        }
        for (const auto& id : expected)
            if (!seen.count(id)) throw SchemaError("no profile for object '" + id + "'");
        put(5, ArtifactType::profile_set, {{"profiles", profiles}});
        put(5, ArtifactType::room_style, to_json(room_style_from_json(payload.at("room_style"))));
    }

    // Stage 6: part decompositions, surface-bound minors, retrieval.
    void stage6() {
        const auto v = view(6);
        const SceneProgram layout = need_program(v, 6);
        std::optional<MinorSidecar> sidecar;
        if (const json* s = find_payload(v, ArtifactType::sidecar)) sidecar = sidecar_from_json(*s);
        std::map<std::string, std::string> profile_text;
        if (const json* p = find_payload(v, ArtifactType::profile_set))
            for (const auto& prof : p->at("profiles")) {
                std::string t = prof.value("function", "");
                for (const auto& w : prof.at("material")) t += " " + w.get<std::string>();
                for (const auto& w : prof.at("color")) t += " " + w.get<std::string>();
                profile_text[prof.at("id").get<std::string>()] = t;
            }

        std::vector<MinorObject> surface_minors;
        if (sidecar)
            for (const auto& m : sidecar->entries)
                if (m.surface_bound) surface_minors.push_back(m);
        json minors_j = json::array();
        for (const auto& m : surface_minors) minors_j.push_back({{"id", m.id}, {"category", m.category}, {"parent", m.parent_surface}});
        json profiles_j = json::array();
        if (const json* p = find_payload(v, ArtifactType::profile_set)) profiles_j = p->at("profiles");

        const json payload = ask("stage6", "part_decomposition",
                                 {{"layout", to_json(layout).dump()}, {"profiles", profiles_j.dump()}, {"minors", minors_j.dump()}}, v);
        const json& objects = payload.at("objects");

        std::set<std::string> minor_ids;
        for (const auto& m : surface_minors) minor_ids.insert(m.id);
        GeometryDict major_parts, minor_parts;
        std::set<std::string> retrieve;
        std::map<std::string, std::string> descriptions;
        for (const auto& [id, entry] : objects.items()) {
            const bool in_layout = find_object(layout, id) != nullptr;
            if (!in_layout && !minor_ids.count(id)) {
                warn("part decomposition for unknown object '" + id + "'; ignored");
                continue;
            }
            if (entry.contains("description")) descriptions[id] = entry["description"].get<std::string>();
            if (entry.value("retrieve", false)) {
                retrieve.insert(id);
                continue;
            }
            auto parts = parts_from_json(entry.at("parts"), "/objects/" + id + "/parts");
            if (parts.empty()) continue;
            (in_layout ? major_parts : minor_parts)[id] = std::move(parts);
        }

        auto [program, dict] = replace_with_parts(layout, major_parts);

        json unplaced = json::array();
        std::map<std::string, std::vector<SupportSurface>> surfaces;
        for (const auto& m : surface_minors) {
            const Statement* parent = find_object(program, m.parent_surface);
            if (!parent) {
                unplaced.push_back({{"id", m.id}, {"reason", "parent '" + m.parent_surface + "' is not in the program"}});
                continue;
            }
            auto& list = surfaces[m.parent_surface];
            if (list.empty()) list = support_surfaces_of(*parent, cfg_.surfaces);
            const Vec3 size = m.size_hint.value_or(cfg_.default_minor_size);
            bool placed = false;
            for (auto& surf : list) {
                const auto slot = find_free_slot(surf, {size.x, size.y});
                if (!slot) continue;
                Proxy p;
                p.id = m.id;
                p.category = m.category;
                p.size = size;
                p.parent = m.parent_surface;
                p.placement_type = PlacementType::surface;
                p.pose.position = slot->position;
                p.pose.yaw = normalize_yaw(slot->yaw);
                const Statement st = p;
                if (!contained_in_room(footprint_of(st), program.shell)) continue;
                surf = occupy(std::move(surf), footprint_of(st));
                program.statements.push_back(st);
                placed = true;
                break;
            }
            if (!placed) unplaced.push_back({{"id", m.id}, {"reason", "no free surface area"}});
        }
        std::erase_if(minor_parts, [&](const auto& kv) { return !find_object(program, kv.first); });
        if (!minor_parts.empty()) {
            auto [with_minors, more] = replace_with_parts(program, minor_parts);
            program = std::move(with_minors);
            dict.insert(more.begin(), more.end());
        }
        validate(program);

        json retrieved = json::array(), placeholders = json::array();
        if (!retrieve.empty()) {
            const AssetLibrary library = cfg_.asset_root.empty() ? AssetLibrary{} : load_library(cfg_.asset_root);
            for (const auto& id : retrieve) {
                const Statement* s = find_object(program, id);
                const auto* proxy = s ? std::get_if<Proxy>(s) : nullptr;
                if (!proxy) continue;  // unplaced minor
                MatchQuery q{proxy->category, descriptions.count(id) ? descriptions[id] : profile_text[id], proxy->size};
                if (auto asset = select_asset(library, q)) {
                    retrieved.push_back({{"id", id}, {"asset_id", asset->asset_id}, {"score", match_score(*asset, q)}});
                    program = substitute_placeholder(program, id, *asset);
                } else {
                    placeholders.push_back(id);
                    warn("no library asset for '" + id + "'; placeholder retained");
                }
            }
        }

        put(6, ArtifactType::geometry_dict, to_json(dict));
        put(6, ArtifactType::scene_program, to_json(program));
        put(6, ArtifactType::report, {{"unplaced", unplaced}, {"retrieved", retrieved}, {"placeholders", placeholders}});
        artifact("stage6_geom", "stage6_geom.json", serialize(program));
    }

    // A reply may name objects that a reduced memory view never placed; those
    // targets are dropped with a warning. Any other unresolvable target still
    // fails the pass.
    bool drop_absent(const SceneProgram& p, const std::string& target) {
        if (is_shell_target(target)) return false;
        const std::string object = target.substr(0, target.find('/'));
        if (find_object(p, object)) return false;
        warn("target '" + target + "' names an object that is not in the program; dropped");
        return true;
    }

    // Stage 8: part-level materials.
    void stage8() {
        const auto v = view(8);
        const SceneProgram program = need_program(v, 8);
        std::map<std::string, std::string> slots{{"program", to_json(program).dump()}};
        const json* profiles = find_payload(v, ArtifactType::profile_set);
        const json* style = find_payload(v, ArtifactType::room_style);
        slots["profiles"] = profiles ? profiles->dump() : "{}";
        slots["style"] = style ? style->dump() : "{}";
        const json payload = ask("stage8", "material_set", slots, v);
        std::vector<MaterialAssign> assigns;
        for (const auto& m : payload.at("materials")) {
            MaterialAssign a;
            a.target = m.at("target").get<std::string>();
            a.spec.material_type = m.at("material_type").get<std::string>();
            a.spec.base_color = detail::Reader::to_vec3(m.at("base_color"), "/materials/base_color");
            a.spec.roughness = m.value("roughness", a.spec.roughness);
            a.spec.metallic = m.value("metallic", a.spec.metallic);
            a.spec.specular = m.value("specular", a.spec.specular);
            if (drop_absent(program, a.target)) continue;
            assigns.push_back(std::move(a));
        }
        auto r = apply_materials(program, assigns);
        for (auto& w : r.warnings) warn(std::move(w));
        put(8, ArtifactType::scene_program, to_json(r.program));
        snapshot_program("stage8_materials", r.program);
    }

    // Stage 9: textures. Images come from a procedural stub; a rejected reply
    // is retried once with a simplified prompt.
    void stage9() {
        const auto v = view(9);
        const SceneProgram program = need_program(v, 9);
        const json* style = find_payload(v, ArtifactType::room_style);
        std::map<std::string, std::string> slots{{"program", to_json(program).dump()}, {"style", style ? style->dump() : "{}"}};
        json payload;
        try {
            payload = ask("stage9", "texture_set", slots, v);
        } catch (const SchemaError& e) {
            warn(std::string("texture reply rejected; retrying with the simplified prompt: ") + e.what());
            payload = ask("stage9", "texture_set", {{"program", "floor, walls, rugs only"}, {"style", "{}"}}, v,
                          {{"simplified", true}});
        }
        std::vector<TextureBind> binds;
        for (const auto& t : payload.at("textures")) {
            TextureBind b;
            b.target = t.at("target").get<std::string>();
            if (drop_absent(program, b.target)) continue;
            const std::string seed = b.target + "|" + t.value("pattern", "") + "|" + t.value("prompt", "");
            const auto rel = std::filesystem::path("textures") / (detail::slug(b.target) + ".png");
            std::filesystem::create_directories(cfg_.run_dir / "textures");
            const std::uint64_t h = fnv1a(seed);
            write_png(cfg_.run_dir / rel, checker_image(128, 8, detail::color_of(h), detail::color_of(h >> 24)));
            b.image_ref = rel.generic_string();
            binds.push_back(std::move(b));
        }
        auto r = apply_textures(program, binds, {cfg_.run_dir});
        for (auto& w : r.warnings) warn(std::move(w));
        put(9, ArtifactType::scene_program, to_json(r.program));
        snapshot_program("stage9_textures", r.program);
    }

    // Stage 10: lighting and render setup, static fixups, placement
    // correction, emission.
    void stage10() {
        const auto v = view(10);
        const SceneProgram program = need_program(v, 10);
        const json payload = ask("stage10", "lighting_plan", {{"program", to_json(program).dump()}}, v);
        const SceneProgram raw = render_setup(program, lighting_plan_from_json(payload));
        FixupConfig fc;
        fc.base_dir = cfg_.run_dir;
        auto [fixed, fixes] = static_fixups(raw, fc);
        auto [final_program, report] = correct_placements(fixed, cfg_.correction);

        json fixes_j = json::array();
        for (const auto& f : fixes) fixes_j.push_back(to_json(f));
        const json report_j{{"fixes", fixes_j}, {"correction", to_json(report)}};
        put(10, ArtifactType::scene_program, to_json(final_program));
        put(10, ArtifactType::report, report_j);
        snapshot_program("stage10_raw", raw);
        artifact("stage10_correction", "stage10_correction.json", canonical_dump(report_j));
        artifact("final_program", "out/final_program.json", serialize(final_program));

        EmitOptions eo;
        eo.mode = cfg_.shim;
        eo.script_dir = cfg_.run_dir / "out";
        eo.texture_root = cfg_.run_dir;
        eo.asset_root = cfg_.asset_root.empty() ? cfg_.run_dir : cfg_.asset_root;
        artifact("script", "out/scene.blend.py", emit_blender_script(final_program, eo));
        preview("final", final_program);
    }

    PipelineConfig cfg_;
    Provider& provider_;
    std::optional<PromptLibrary> prompts_;
    MemoryStore memory_;
    RunState state_;
    StageRecord* current_ = nullptr;
};

/// Convenience wrapper for a full run.
inline RunState run_all(const PipelineConfig& cfg, Provider& provider) { return Pipeline(cfg, provider).run(); }

}  // namespace car
