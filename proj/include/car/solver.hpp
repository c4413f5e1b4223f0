#pragma once

// Deterministic post-hoc correction. Objects settle largest first; a movable
// object that leaves the room or overlaps an already settled neighbor moves to
// the nearest feasible candidate among its clamped position and a local grid
// around its generated position, falling back to a grid around the clamped
// position. Supported objects are re-seated on their
// parent.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "car/geometry.hpp"
#include "car/passes.hpp"
#include "car/program.hpp"

namespace car {

struct CorrectionConfig {
    double grid_step = 0.05;
    double max_radius = 1.5;
    double collision_scope = 3.0;
    // Objects no taller than this (rugs, mats) lie under furniture and never
    // collide.
    double flat_height = 0.03;
    SurfaceConfig surfaces{};

    void check() const {
        if (!(grid_step > 0.0)) throw ConfigError("correction grid_step must be positive");
        if (!(max_radius >= grid_step)) throw ConfigError("correction max_radius must be >= grid_step");
        if (!(collision_scope >= 0.0)) throw ConfigError("correction collision_scope must be non-negative");
    }
};

inline constexpr double kOverlapEps = 1e-9;

inline bool is_movable(PlacementType p) { return p == PlacementType::floor || p == PlacementType::surface; }

struct CorrectionEntry {
    ObjectId id;
    Vec3 original;
    Vec3 corrected;
    double displacement = 0.0;
    std::vector<std::string> kinds;  // boundary, overlap, stacking, carried
};

struct CorrectionReport {
    std::vector<CorrectionEntry> entries;
    std::vector<ObjectId> unresolved;

    bool empty() const { return entries.empty() && unresolved.empty(); }
    const CorrectionEntry* find(std::string_view id) const {
        for (const auto& e : entries)
            if (e.id == id) return &e;
        return nullptr;
    }
};

inline json to_json(const CorrectionReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"id", e.id},
                           {"original", to_json_vec(e.original)},
                           {"corrected", to_json_vec(e.corrected)},
                           {"displacement", e.displacement},
                           {"kinds", e.kinds}});
    return {{"entries", entries}, {"unresolved", r.unresolved}};
}

/// Support hierarchy of a program: parent links between object statements.
class SupportTree {
public:
    explicit SupportTree(const SceneProgram& p) {
        for (const auto* s : objects_of(p))
            if (const auto& parent = object_parent(*s)) parent_[*object_id(*s)] = *parent;
    }

    bool is_ancestor(const std::string& maybe_ancestor, std::string node) const {
        for (int guard = 0; guard < 1024; ++guard) {
            auto it = parent_.find(node);
            if (it == parent_.end()) return false;
            if (it->second == maybe_ancestor) return true;
            node = it->second;
        }
        return false;
    }

    bool related(const std::string& a, const std::string& b) const { return is_ancestor(a, b) || is_ancestor(b, a); }

    std::vector<std::string> descendants(const std::string& id) const {
        std::vector<std::string> out;
        for (const auto& [child, _] : parent_)
            if (is_ancestor(id, child)) out.push_back(child);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::map<std::string, std::string> parent_;
};

/// Whether two objects compete for the same floor or surface space. Flat
/// coverings and support-hierarchy relatives never collide.
inline bool collision_pair(const Statement& a, const Statement& b, const SupportTree& tree, double flat_height) {
    const ObjectId& ia = *object_id(a);
    const ObjectId& ib = *object_id(b);
    if (ia == ib || tree.related(ia, ib)) return false;
    auto flat = [&](const Statement& s) {
        const auto [lo, hi] = vertical_extent(s);
        return hi - lo <= flat_height;
    };
    if (flat(a) || flat(b)) return false;
    const PlacementType pa = object_placement(a);
    const PlacementType pb = object_placement(b);
    if (pa == PlacementType::floor && pb == PlacementType::floor) return true;
    if (pa == PlacementType::surface && pb == PlacementType::surface) return object_parent(a) == object_parent(b);
    return false;
}

inline Footprint footprint_at(const Statement& s, Vec2 position) {
    Footprint f = footprint_of(s);
    f.center = f.center + (position - object_pose(s).position.xy());
    return f;
}

/// Nearest point to `p` where the object's footprint fits in the room.
inline Vec2 clamp_into_room(const Statement& s, Vec2 p, const RoomShell& shell) {
    const Footprint f = footprint_at(s, p);
    const Vec2 h = f.aabb_half();
    const Vec2 offset = f.center - p;  // footprint center relative to origin
    auto clamp_axis = [](double c, double half, double extent) {
        if (2.0 * half >= extent) return extent / 2.0;
        return std::clamp(c, half, extent - half);
    };
    const Vec2 c{clamp_axis(f.center.x, h.x, shell.width), clamp_axis(f.center.y, h.y, shell.depth)};
    return c - offset;
}

/// Grid neighborhood of `center`: every offset (i*step, j*step) within
/// `radius`, in no particular order.
inline std::vector<Vec2> grid_neighborhood(Vec2 center, double step, double radius) {
    const int n = static_cast<int>(std::floor(radius / step + 1e-9));
    std::vector<Vec2> out;
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j) {
            if (static_cast<double>(i) * i + static_cast<double>(j) * j > (radius / step) * (radius / step) + 1e-9)
                continue;
            out.push_back({center.x + i * step, center.y + j * step});
        }
    return out;
}

namespace detail {

struct Placement {
    Vec2 xy;
    double dist;
};

inline bool placement_before(const Placement& a, const Placement& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.xy.x != b.xy.x) return a.xy.x < b.xy.x;
    return a.xy.y < b.xy.y;
}

}  // namespace detail

/// Processing order: descending footprint area, then id.
inline std::vector<std::size_t> correction_order(const SceneProgram& p) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < p.statements.size(); ++i)
        if (is_object(p.statements[i])) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double fa = footprint_of(p.statements[a]).area();
        const double fb = footprint_of(p.statements[b]).area();
        if (fa != fb) return fa > fb;
        return *object_id(p.statements[a]) < *object_id(p.statements[b]);
    });
    return idx;
}

class PlacementCorrector {
public:
    PlacementCorrector(SceneProgram program, CorrectionConfig cfg)
        : program_(std::move(program)), cfg_(cfg), tree_(program_), settled_(program_.statements.size(), true) {
        cfg_.check();
    }

    /// Boundary or overlap violations of object `index` at `xy`. During a run
    /// only objects already settled count as obstacles.
    std::vector<std::string> violations(std::size_t index, Vec2 xy) const {
        std::vector<std::string> out;
        const Statement& s = program_.statements[index];
        const Footprint f = footprint_at(s, xy);
        if (!contained_in_room(f, program_.shell)) out.emplace_back("boundary");
        for (std::size_t k = 0; k < program_.statements.size(); ++k) {
            const Statement& other = program_.statements[k];
            if (k == index || !settled_[k] || !is_object(other)) continue;
            if (!collision_pair(s, other, tree_, cfg_.flat_height)) continue;
            const Footprint g = footprint_of(other);
            if (norm(g.center - f.center) - g.bounding_radius() - f.bounding_radius() > cfg_.collision_scope) continue;
            if (overlap_area(f, g) > kOverlapEps) {
                out.emplace_back("overlap");
                break;
            }
        }
        return out;
    }

    bool feasible(std::size_t index, Vec2 xy) const { return violations(index, xy).empty(); }

    std::pair<SceneProgram, CorrectionReport> run() {
        std::map<std::string, CorrectionEntry> entries;
        std::vector<ObjectId> unresolved;
        auto entry_for = [&](const Statement& s) -> CorrectionEntry& {
            const ObjectId& id = *object_id(s);
            auto [it, inserted] = entries.try_emplace(id);
            if (inserted) {
                it->second.id = id;
                it->second.original = object_pose(s).position;
            }
            return it->second;
        };
        auto add_kind = [](CorrectionEntry& e, const std::string& k) {
            if (std::find(e.kinds.begin(), e.kinds.end(), k) == e.kinds.end()) e.kinds.push_back(k);
        };

        const auto order = correction_order(program_);
        for (std::size_t index : order)
            settled_[index] = !is_movable(object_placement(program_.statements[index]));
        for (std::size_t index : order) {
            Statement& s = program_.statements[index];
            if (!is_movable(object_placement(s))) continue;
            settled_[index] = true;
            const Vec2 start = object_pose(s).position.xy();
            const auto found = violations(index, start);
            if (!found.empty()) {
                std::vector<detail::Placement> candidates;
                const Vec2 clamped = clamp_into_room(s, start, program_.shell);
                candidates.push_back({clamped, norm(clamped - start)});
                for (const Vec2& c : grid_neighborhood(start, cfg_.grid_step, cfg_.max_radius))
                    candidates.push_back({c, norm(c - start)});
                std::sort(candidates.begin(), candidates.end(), detail::placement_before);

                std::optional<Vec2> target = first_feasible(index, candidates);
                // Nothing near the generated spot: retry around the clamped
                // point so that a second pass has nothing left to find.
                if (!target && !(clamped == start)) {
                    candidates.clear();
                    for (const Vec2& c : grid_neighborhood(clamped, cfg_.grid_step, cfg_.max_radius))
                        candidates.push_back({c, norm(c - clamped)});
                    std::sort(candidates.begin(), candidates.end(), detail::placement_before);
                    target = first_feasible(index, candidates);
                }
                CorrectionEntry& e = entry_for(s);
                for (const auto& k : found) add_kind(e, k);
                if (!target) {
                    unresolved.push_back(*object_id(s));
                    target = contained_in_room(footprint_at(s, start), program_.shell) ? start : clamped;
                }
                move_with_descendants(s, *target - start, entry_for, add_kind);
            }
            if (object_placement(s) == PlacementType::surface) reseat(s, entry_for, add_kind);
        }

        CorrectionReport report;
        for (auto& [id, e] : entries) {
            const Statement* s = find_object(program_, id);
            e.corrected = object_pose(*s).position;
            e.displacement = norm(e.corrected - e.original);
            if (e.displacement == 0.0) continue;
            report.entries.push_back(std::move(e));
        }
        std::sort(unresolved.begin(), unresolved.end());
        report.unresolved = std::move(unresolved);
        return {program_, std::move(report)};
    }

    const SceneProgram& program() const { return program_; }

private:
    std::optional<Vec2> first_feasible(std::size_t index, const std::vector<detail::Placement>& sorted) const {
        for (const auto& c : sorted)
            if (feasible(index, c.xy)) return c.xy;
        return std::nullopt;
    }

    template <class EntryFor, class AddKind>
    void move_with_descendants(Statement& s, Vec2 delta, EntryFor& entry_for, AddKind& add_kind) {
        if (delta == Vec2{}) return;
        Pose& pose = object_pose(s);
        pose.position = {pose.position.x + delta.x, pose.position.y + delta.y, pose.position.z};
        for (const auto& child : tree_.descendants(*object_id(s))) {
            Statement* c = find_object(program_, child);
            CorrectionEntry& e = entry_for(*c);
            add_kind(e, "carried");
            Pose& cp = object_pose(*c);
            cp.position = {cp.position.x + delta.x, cp.position.y + delta.y, cp.position.z};
        }
    }

    template <class EntryFor, class AddKind>
    void reseat(Statement& s, EntryFor& entry_for, AddKind& add_kind) {
        const Statement* parent = find_object(program_, *object_parent(s));
        if (!parent) return;
        const auto surfaces = support_surfaces_of(*parent, cfg_.surfaces);
        if (surfaces.empty()) return;
        const Vec2 c = footprint_of(s).center;
        const SupportSurface* chosen = &surfaces.front();
        for (const auto& surf : surfaces)
            if (surf.rect.contains_point(c, 1e-9)) {
                chosen = &surf;
                break;
            }
        Pose& pose = object_pose(s);
        if (std::abs(pose.position.z - chosen->height) <= 1e-9) return;
        CorrectionEntry& e = entry_for(s);
        add_kind(e, "stacking");
        pose.position.z = chosen->height;
    }

    SceneProgram program_;
    CorrectionConfig cfg_;
    SupportTree tree_;
    std::vector<bool> settled_;
};

/// PostHoc placement correction. Requires a room shell with positive extents.
inline std::pair<SceneProgram, CorrectionReport> correct_placements(const SceneProgram& program,
                                                                     const CorrectionConfig& cfg = {}) {
    if (!(program.shell.width > 0.0) || !(program.shell.depth > 0.0))
        throw StructuralError("correct_placements: program has no room shell");
    return PlacementCorrector(program, cfg).run();
}

// ---------------------------------------------------------------------------
// Static fixups

struct LightRange {
    double min;
    double max;
};

struct FixupConfig {
    std::filesystem::path base_dir = ".";
    std::map<LightKind, LightRange> light_ranges{{LightKind::sun, {0.1, 10.0}},
                                                 {LightKind::point, {1.0, 2000.0}},
                                                 {LightKind::spot, {1.0, 2000.0}},
                                                 {LightKind::area, {1.0, 2000.0}}};
    double camera_margin = 0.05;
    MaterialSpec default_material{};
};

struct Fix {
    std::string kind;  // default_material, texture_fallback, light_clamp, camera_coverage, missing_camera
    std::string target;
    std::string detail;
};

inline json to_json(const Fix& f) { return {{"kind", f.kind}, {"target", f.target}, {"detail", f.detail}}; }

inline std::pair<SceneProgram, std::vector<Fix>> static_fixups(const SceneProgram& program, const FixupConfig& cfg = {}) {
    SceneProgram out = program;
    std::vector<Fix> fixes;

    std::set<std::string> textured;
    for (const auto& s : out.statements)
        if (const auto* m = std::get_if<MaterialAssign>(&s)) textured.insert(m->target.substr(0, m->target.find('/')));
    std::vector<std::string> bare;
    for (const auto* s : objects_of(out))
        if (!textured.count(*object_id(*s))) bare.push_back(*object_id(*s));
    for (const auto& id : bare) {
        MaterialAssign m;
        m.target = id;
        m.spec = cfg.default_material;
        out.statements.emplace_back(m);
        fixes.push_back({"default_material", id, "neutral default material"});
    }

    const TextureOptions topts{cfg.base_dir};
    for (auto& s : out.statements) {
        auto* t = std::get_if<TextureBind>(&s);
        if (!t || texture_exists(topts, t->image_ref)) continue;
        fixes.push_back({"texture_fallback", t->target, "missing image '" + t->image_ref + "'"});
        t->image_ref = kFallbackTexture;
        t->fallback = true;
    }
    for (auto& s : out.statements) {
        auto* m = std::get_if<MaterialAssign>(&s);
        if (!m || !m->image || texture_exists(topts, m->image->image_ref)) continue;
        m->image->image_ref = kFallbackTexture;
    }

    for (auto& s : out.statements) {
        auto* l = std::get_if<Light>(&s);
        if (!l) continue;
        const auto it = cfg.light_ranges.find(l->kind);
        if (it == cfg.light_ranges.end()) continue;
        const double clamped = std::clamp(l->intensity, it->second.min, it->second.max);
        if (clamped != l->intensity) {
            fixes.push_back({"light_clamp", l->id,
                             "intensity " + format_number(l->intensity) + " -> " + format_number(clamped)});
            l->intensity = clamped;
        }
    }

    int res_x = 1024, res_y = 1024;
    for (const auto& s : out.statements)
        if (const auto* r = std::get_if<RenderSettings>(&s)) {
            res_x = r->resolution_x;
            res_y = r->resolution_y;
        }
    bool has_camera = false;
    for (auto& s : out.statements) {
        auto* c = std::get_if<Camera>(&s);
        if (!c) continue;
        has_camera = true;
        if (c->kind != CameraKind::topdown_ortho) continue;
        const double need = camera_cover_scale(out.shell, c->pose.position.xy(), res_x, res_y, cfg.camera_margin);
        if (c->scale_or_fov < need) {
            fixes.push_back({"camera_coverage", c->id,
                             "ortho scale " + format_number(c->scale_or_fov) + " -> " + format_number(need)});
            c->scale_or_fov = need;
        }
    }
    if (!has_camera) {
        out.statements.emplace_back(topdown_camera(out.shell, res_x, res_y));
        fixes.push_back({"missing_camera", "camera", "added top-down orthographic camera"});
    }
    validate(out);
    return {std::move(out), std::move(fixes)};
}

}  // namespace car
