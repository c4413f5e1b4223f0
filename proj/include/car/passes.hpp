#pragma once

// Program rewrite passes. Append and Replace build the layout and geometry;
// ApplyMat, ApplyTex and RenderSetup only touch appearance statements and
// must leave geometry_projection() unchanged.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "car/geometry.hpp"
#include "car/program.hpp"

namespace car {

using GeometryDict = std::map<ObjectId, std::vector<Part>>;

/// An object to be appended as a proxy constructor.
struct PlacedItem {
    ObjectId id;
    std::string category;
    Pose pose;
    Vec3 size{0.5, 0.5, 0.5};
    std::optional<ObjectId> parent;
    PlacementType placement_type = PlacementType::floor;
};

struct WallSnap {
    const WallSegment* wall = nullptr;
    Vec2 point;   // projection onto the wall face
    Vec2 normal;  // unit, pointing into the room
};

/// Nearest wall face to `p` and its inward normal.
inline std::optional<WallSnap> nearest_wall(const RoomShell& shell, Vec2 p) {
    std::optional<WallSnap> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& w : shell.walls) {
        const Vec2 ab = w.b - w.a;
        const double len = norm(ab);
        if (len <= 0.0) continue;
        const double t = std::clamp(dot(p - w.a, ab) / (len * len), 0.0, 1.0);
        const Vec2 q = w.a + ab * t;
        const double d = norm(p - q);
        if (d < best_d) {
            Vec2 n{-ab.y / len, ab.x / len};
            if (dot(n, shell.center() - q) < 0.0) n = n * -1.0;
            best_d = d;
            best = WallSnap{&w, q, n};
        }
    }
    return best;
}

/// Moves a wall-mounted item flush against its nearest wall face, facing the
/// room. The item keeps its mounting height; its back face touches the wall.
inline Pose snap_to_wall(const RoomShell& shell, const Pose& pose, Vec3 size) {
    const auto snap = nearest_wall(shell, pose.position.xy());
    if (!snap) return pose;
    const WallSegment& w = *snap->wall;
    const Vec2 ab = w.b - w.a;
    const double len = norm(ab);
    double t = dot(snap->point - w.a, ab) / len;
    if (len >= size.x) t = std::clamp(t, size.x / 2.0, len - size.x / 2.0);
    const Vec2 on_wall = w.a + ab * (t / len);
    const Vec2 xy = on_wall + snap->normal * (size.y / 2.0);
    Pose out;
    out.position = {xy.x, xy.y, pose.position.z};
    out.yaw = normalize_yaw(std::atan2(-snap->normal.x, snap->normal.y));
    return out;
}

/// Append: freezes the existing statements and adds wall items (snapped) and
/// salient minor objects as proxies.
inline SceneProgram append_objects(const SceneProgram& major, const std::vector<PlacedItem>& walls,
                                   const std::vector<PlacedItem>& minors) {
    SceneProgram out = major;
    std::set<std::string> ids;
    for (const auto& s : major.statements)
        if (const ObjectId* id = object_id(s)) ids.insert(*id);
    auto add = [&](const PlacedItem& item, bool wall) {
        if (!ids.insert(item.id).second) throw ConflictError("append: id '" + item.id + "' already exists");
        Proxy p;
        p.id = item.id;
        p.category = item.category;
        p.size = item.size;
        p.parent = item.parent;
        p.placement_type = wall ? PlacementType::wall : item.placement_type;
        p.pose = wall ? snap_to_wall(major.shell, item.pose, item.size) : item.pose;
        p.pose.yaw = normalize_yaw(p.pose.yaw);
        out.statements.emplace_back(std::move(p));
    };
    for (const auto& w : walls) add(w, true);
    for (const auto& m : minors) add(m, false);
    validate(out);
    return out;
}

/// Replace: swaps mapped proxies for part assemblies with the same id,
/// category and pose. The mapping is returned as the geometry dictionary.
inline std::pair<SceneProgram, GeometryDict> replace_with_parts(const SceneProgram& layout,
                                                                const GeometryDict& mapping) {
    SceneProgram out = layout;
    for (const auto& [id, parts] : mapping) {
        Statement* s = find_object(out, id);
        if (!s) throw LinkError("replace: unknown object '" + id + "'");
        const auto* proxy = std::get_if<Proxy>(s);
        if (!proxy) throw LinkError("replace: object '" + id + "' is not a proxy");
        Assembly a;
        a.id = proxy->id;
        a.category = proxy->category;
        a.pose = proxy->pose;
        a.parts = parts;
        a.parent = proxy->parent;
        a.placement_type = proxy->placement_type;
        *s = std::move(a);
    }
    validate(out);
    return {std::move(out), mapping};
}

struct PassResult {
    SceneProgram program;
    std::vector<std::string> warnings;
};

namespace detail {

inline bool contains_any(std::string_view hay, std::span<const std::string_view> needles) {
    std::string lower(hay);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto n : needles)
        if (lower.find(n) != std::string::npos) return true;
    return false;
}

inline bool contains_any(std::string_view hay, std::initializer_list<std::string_view> needles) {
    return contains_any(hay, std::span<const std::string_view>(needles.begin(), needles.size()));
}

inline std::ptrdiff_t find_material(const SceneProgram& p, std::string_view target) {
    for (std::size_t i = 0; i < p.statements.size(); ++i)
        if (auto* m = std::get_if<MaterialAssign>(&p.statements[i]); m && m->target == target)
            return static_cast<std::ptrdiff_t>(i);
    return -1;
}

}  // namespace detail

/// Shader override implied by a material type, the targeted part name, or a
/// shell surface.
inline ShaderOverride override_for(std::string_view target, std::string_view material_type) {
    if (is_shell_target(target)) return ShaderOverride::procedural;
    const auto slash = target.find('/');
    const std::string_view part = slash == std::string_view::npos ? std::string_view{} : target.substr(slash + 1);
    if (detail::contains_any(material_type, {"mirror"}) || detail::contains_any(part, {"mirror"}))
        return ShaderOverride::mirror;
    if (detail::contains_any(material_type, {"glass"}) || detail::contains_any(part, {"glass", "lens"}))
        return ShaderOverride::glass;
    return ShaderOverride::none;
}

/// ApplyMat: inserts or updates one material statement per target. Duplicate
/// targets in `assignments` resolve last-writer-wins with a warning.
inline PassResult apply_materials(const SceneProgram& program, const std::vector<MaterialAssign>& assignments) {
    std::vector<std::string> unresolved;
    for (const auto& a : assignments)
        if (auto why = check_target(program, a.target); !why.empty()) unresolved.push_back(a.target + " (" + why + ")");
    if (!unresolved.empty()) {
        std::string msg = "apply_materials: unresolvable targets:";
        for (const auto& u : unresolved) msg += " " + u;
        throw LinkError(msg);
    }
    PassResult r{program, {}};
    std::set<std::string> written;
    for (const auto& a : assignments) {
        if (!written.insert(a.target).second)
            r.warnings.push_back("duplicate material for '" + a.target + "'; last assignment wins");
        MaterialAssign m = a;
        if (m.shader_override == ShaderOverride::none) m.shader_override = override_for(m.target, m.spec.material_type);
        const auto idx = detail::find_material(r.program, m.target);
        if (idx >= 0) {
            auto& existing = std::get<MaterialAssign>(r.program.statements[static_cast<std::size_t>(idx)]);
            if (!m.image) m.image = existing.image;
            existing = std::move(m);
        } else {
            r.program.statements.emplace_back(std::move(m));
        }
    }
    validate(r.program);
    return r;
}

struct TextureOptions {
    std::filesystem::path base_dir = ".";
};

inline constexpr const char* kFallbackTexture = "builtin:checker";

/// Targets that receive explicit planar UVs: flat decorative objects and
/// parts.
inline bool is_planar_decorative(const SceneProgram& p, std::string_view target) {
    static constexpr std::array<std::string_view, 11> kWords = {
        "rug", "carpet", "mat", "painting", "poster", "picture", "artwork", "canvas", "panel", "frame", "tapestry"};
    if (is_shell_target(target)) return false;
    const auto slash = target.find('/');
    if (slash != std::string_view::npos && detail::contains_any(target.substr(slash + 1), kWords)) return true;
    const Statement* s = find_object(p, target.substr(0, slash));
    return s && detail::contains_any(object_category(*s), kWords);
}

inline bool texture_exists(const TextureOptions& opts, const std::string& ref) {
    if (ref.rfind("builtin:", 0) == 0) return true;
    std::error_code ec;
    return std::filesystem::is_regular_file(opts.base_dir / ref, ec);
}

/// ApplyTex: binds image textures to targets and attaches an image node to
/// the target's material (creating a default material when none exists).
inline PassResult apply_textures(const SceneProgram& program, const std::vector<TextureBind>& binds,
                                 const TextureOptions& opts = {}) {
    std::vector<std::string> unresolved;
    for (const auto& b : binds)
        if (auto why = check_target(program, b.target); !why.empty()) unresolved.push_back(b.target + " (" + why + ")");
    if (!unresolved.empty()) {
        std::string msg = "apply_textures: unresolvable targets:";
        for (const auto& u : unresolved) msg += " " + u;
        throw LinkError(msg);
    }
    PassResult r{program, {}};
    for (const auto& b : binds) {
        TextureBind t = b;
        if (!texture_exists(opts, t.image_ref)) {
            r.warnings.push_back("texture '" + t.image_ref + "' for '" + t.target + "' not found; using checker");
            t.image_ref = kFallbackTexture;
            t.fallback = true;
        }
        if (is_planar_decorative(r.program, t.target)) t.uv.mode = "planar";

        bool replaced = false;
        for (auto& s : r.program.statements)
            if (auto* tb = std::get_if<TextureBind>(&s); tb && tb->target == t.target) {
                *tb = t;
                replaced = true;
            }
        if (!replaced) r.program.statements.emplace_back(t);

        const auto idx = detail::find_material(r.program, t.target);
        if (idx >= 0) {
            std::get<MaterialAssign>(r.program.statements[static_cast<std::size_t>(idx)]).image = ImageNode{t.image_ref, t.uv};
        } else {
            MaterialAssign m;
            m.target = t.target;
            m.shader_override = override_for(t.target, m.spec.material_type);
            m.image = ImageNode{t.image_ref, t.uv};
            r.program.statements.emplace_back(std::move(m));
        }
    }
    validate(r.program);
    return r;
}

// ---------------------------------------------------------------------------
// Lighting and render setup

struct ArtificialLight {
    LightKind kind = LightKind::point;
    Vec3 position;
    double intensity = 100.0;
    Vec3 color{1.0, 0.95, 0.9};
};

struct LightingPlan {
    bool sun = true;
    Vec3 sun_direction{0.3, 0.4, -0.866};
    double sun_strength = 3.0;
    Vec3 sun_color{1.0, 0.98, 0.95};
    std::vector<std::string> windows;  // cutout ids that emit daylight
    double window_strength = 200.0;
    std::vector<ArtificialLight> artificial;
    double ambient = 0.3;
    int resolution = 1024;
    int samples = 32;
};

inline Vec3 unit(Vec3 v) {
    const double n = norm(v);
    return n > 0.0 ? v * (1.0 / n) : Vec3{0.0, 0.0, -1.0};
}

/// Orthographic scale that covers the floor with `margin` for a top-down
/// camera centered at `center` with the given resolution aspect.
inline double camera_cover_scale(const RoomShell& shell, Vec2 center, int res_x, int res_y, double margin = 0.05) {
    const double need_x = 2.0 * std::max(center.x, shell.width - center.x) * (1.0 + margin);
    const double need_y = 2.0 * std::max(center.y, shell.depth - center.y) * (1.0 + margin);
    // Blender's ortho scale spans the larger render dimension.
    const double aspect = static_cast<double>(std::min(res_x, res_y)) / std::max(res_x, res_y);
    return res_x >= res_y ? std::max(need_x, need_y / aspect) : std::max(need_y, need_x / aspect);
}

/// World-space center and inward normal of a wall cutout.
inline std::optional<std::pair<Vec3, Vec2>> cutout_frame(const RoomShell& shell, const Cutout& c) {
    for (const auto& w : shell.walls) {
        if (w.id != c.wall) continue;
        const Vec2 ab = w.b - w.a;
        const double len = norm(ab);
        if (len <= 0.0) return std::nullopt;
        const Vec2 p = w.a + ab * (c.offset / len);
        Vec2 n{-ab.y / len, ab.x / len};
        if (dot(n, shell.center() - p) < 0.0) n = n * -1.0;
        return std::pair{Vec3{p.x, p.y, c.sill + c.height / 2.0}, n};
    }
    return std::nullopt;
}

inline Camera topdown_camera(const RoomShell& shell, int res_x, int res_y) {
    Camera c;
    c.kind = CameraKind::topdown_ortho;
    c.pose.position = {shell.width / 2.0, shell.depth / 2.0, shell.wall_height + std::max(shell.width, shell.depth)};
    c.pose.yaw = 0.0;
    c.scale_or_fov = camera_cover_scale(shell, shell.center(), res_x, res_y);
    return c;
}

/// RenderSetup: replaces any light/camera/render statements with the ones
/// derived from the plan.
inline SceneProgram render_setup(const SceneProgram& program, const LightingPlan& plan) {
    SceneProgram out = program;
    std::erase_if(out.statements, [](const Statement& s) {
        return std::holds_alternative<Light>(s) || std::holds_alternative<Camera>(s) ||
               std::holds_alternative<RenderSettings>(s);
    });
    if (plan.sun) {
        Light sun;
        sun.id = "light_sun";
        sun.kind = LightKind::sun;
        sun.position = {out.shell.width / 2.0, out.shell.depth / 2.0, out.shell.wall_height + 3.0};
        sun.direction = unit(plan.sun_direction);
        sun.intensity = plan.sun_strength;
        sun.color = plan.sun_color;
        out.statements.emplace_back(sun);
    }
    for (const auto& wid : plan.windows) {
        const auto it = std::find_if(out.shell.cutouts.begin(), out.shell.cutouts.end(),
                                     [&](const Cutout& c) { return c.id == wid; });
        if (it == out.shell.cutouts.end()) continue;
        const auto frame = cutout_frame(out.shell, *it);
        if (!frame) continue;
        const auto [center, n] = *frame;
        Light l;
        l.id = "light_" + wid;
        l.kind = LightKind::area;
        l.position = {center.x + n.x * 0.05, center.y + n.y * 0.05, center.z};
        l.direction = {n.x, n.y, 0.0};
        l.intensity = plan.window_strength;
        l.color = {1.0, 1.0, 1.0};
        l.size = it->width;
        out.statements.emplace_back(l);
    }
    for (std::size_t i = 0; i < plan.artificial.size(); ++i) {
        const auto& a = plan.artificial[i];
        Light l;
        l.id = "light_" + to_string(a.kind) + "_" + std::to_string(i);
        l.kind = a.kind;
        l.position = a.position;
        l.direction = {0.0, 0.0, -1.0};
        l.intensity = a.intensity;
        l.color = a.color;
        l.size = a.kind == LightKind::area ? 0.5 : 0.0;
        out.statements.emplace_back(l);
    }
    out.statements.emplace_back(topdown_camera(out.shell, plan.resolution, plan.resolution));
    RenderSettings rs;
    rs.resolution_x = plan.resolution;
    rs.resolution_y = plan.resolution;
    rs.samples = plan.samples;
    rs.world_strength = plan.ambient;
    out.statements.emplace_back(rs);
    validate(out);
    return out;
}

// ---------------------------------------------------------------------------
// JSON for pass inputs

inline std::vector<Part> parts_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) throw ParseError(path + ": expected array");
    std::vector<Part> parts;
    for (std::size_t i = 0; i < j.size(); ++i) parts.push_back(detail::read_part(j[i], path + "/" + std::to_string(i)));
    return parts;
}

inline json parts_to_json(const std::vector<Part>& parts) {
    json j = json::array();
    for (const auto& p : parts) j.push_back(detail::part_json(p));
    return j;
}

inline json to_json(const GeometryDict& d) {
    json j = json::object();
    for (const auto& [id, parts] : d) j[id] = parts_to_json(parts);
    return j;
}

inline LightingPlan lighting_plan_from_json(const json& j) {
    LightingPlan p;
    if (j.contains("sun")) {
        const json& s = j["sun"];
        p.sun = s.value("enabled", true);
        if (s.contains("direction")) p.sun_direction = detail::Reader::to_vec3(s["direction"], "/sun/direction");
        p.sun_strength = s.value("strength", p.sun_strength);
        if (s.contains("color")) p.sun_color = detail::Reader::to_vec3(s["color"], "/sun/color");
    }
    if (j.contains("windows")) p.windows = j["windows"].get<std::vector<std::string>>();
    p.window_strength = j.value("window_strength", p.window_strength);
    if (j.contains("artificial"))
        for (std::size_t i = 0; i < j["artificial"].size(); ++i) {
            const json& a = j["artificial"][i];
            const std::string path = "/artificial/" + std::to_string(i);
            ArtificialLight l;
            auto kind = light_kind_from_string(a.at("kind").get<std::string>());
            if (!kind) throw ParseError(path + "/kind: unknown light kind");
            l.kind = *kind;
            l.position = detail::Reader::to_vec3(a.at("position"), path + "/position");
            l.intensity = a.value("intensity", l.intensity);
            if (a.contains("color")) l.color = detail::Reader::to_vec3(a["color"], path + "/color");
            p.artificial.push_back(l);
        }
    p.ambient = j.value("ambient", p.ambient);
    p.resolution = j.value("resolution", p.resolution);
    p.samples = j.value("samples", p.samples);
    return p;
}

}  // namespace car
