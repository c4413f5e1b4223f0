#pragma once

// Scene program IR: a straight-line sequence of constructor statements over a
// room shell. Serialized as canonical JSON (see docs/ir-schema.md).

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "car/common.hpp"

namespace car {

inline constexpr const char* kIrVersion = "car-ir/1";

enum class PlacementType { floor, wall, surface, ceiling };

inline std::string to_string(PlacementType p) {
    switch (p) {
        case PlacementType::floor: return "floor";
        case PlacementType::wall: return "wall";
        case PlacementType::surface: return "surface";
        case PlacementType::ceiling: return "ceiling";
    }
    return "floor";
}

inline std::optional<PlacementType> placement_from_string(std::string_view s) {
    if (s == "floor") return PlacementType::floor;
    if (s == "wall") return PlacementType::wall;
    if (s == "surface") return PlacementType::surface;
    if (s == "ceiling") return PlacementType::ceiling;
    return std::nullopt;
}

/// Object origin sits at the footprint center on the bottom face.
struct Pose {
    Vec3 position;
    double yaw = 0.0;
    friend bool operator==(const Pose&, const Pose&) = default;
};

enum class Primitive { box, cylinder, sphere, cone, plane, torus };

inline constexpr std::array<std::string_view, 6> kPrimitiveNames = {
    "box", "cylinder", "sphere", "cone", "plane", "torus"};

inline std::string to_string(Primitive p) {
    return std::string(kPrimitiveNames[static_cast<std::size_t>(p)]);
}

inline std::optional<Primitive> primitive_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kPrimitiveNames.size(); ++i)
        if (kPrimitiveNames[i] == s) return static_cast<Primitive>(i);
    return std::nullopt;
}

/// A primitive in the owning object's local frame. `offset` is the part's
/// center; `rotation` is XYZ euler (radians) applied about that center.
struct Part {
    std::string name;
    Primitive primitive = Primitive::box;
    Vec3 size;
    Vec3 offset;
    Vec3 rotation;
    friend bool operator==(const Part&, const Part&) = default;
};

struct MaterialSpec {
    std::string material_type = "plastic";
    Vec3 base_color{0.8, 0.8, 0.8};
    double roughness = 0.5;
    double metallic = 0.0;
    double specular = 0.5;
    friend bool operator==(const MaterialSpec&, const MaterialSpec&) = default;
};

struct UvMapping {
    std::string mode = "box";  // box | planar
    Vec2 scale{1.0, 1.0};
    double rotation = 0.0;
    friend bool operator==(const UvMapping&, const UvMapping&) = default;
};

struct Proxy {
    ObjectId id;
    std::string category;
    Pose pose;
    Vec3 size;
    std::optional<ObjectId> parent;
    PlacementType placement_type = PlacementType::floor;
    friend bool operator==(const Proxy&, const Proxy&) = default;
};

struct Assembly {
    ObjectId id;
    std::string category;
    Pose pose;
    std::vector<Part> parts;
    std::optional<ObjectId> parent;
    PlacementType placement_type = PlacementType::floor;
    friend bool operator==(const Assembly&, const Assembly&) = default;
};

/// A retrieved library mesh standing in for a placeholder proxy.
struct AssetInstance {
    ObjectId id;
    std::string category;
    std::string asset_id;
    std::string mesh_ref;
    Pose pose;
    Vec3 canonical_size;
    Vec3 scale{1.0, 1.0, 1.0};
    std::optional<ObjectId> parent;
    PlacementType placement_type = PlacementType::surface;

    Vec3 size() const noexcept {
        return {canonical_size.x * scale.x, canonical_size.y * scale.y, canonical_size.z * scale.z};
    }
    friend bool operator==(const AssetInstance&, const AssetInstance&) = default;
};

enum class ShaderOverride { none, glass, mirror, procedural };

inline std::string to_string(ShaderOverride o) {
    switch (o) {
        case ShaderOverride::none: return "none";
        case ShaderOverride::glass: return "glass";
        case ShaderOverride::mirror: return "mirror";
        case ShaderOverride::procedural: return "procedural";
    }
    return "none";
}

inline std::optional<ShaderOverride> shader_override_from_string(std::string_view s) {
    if (s == "none") return ShaderOverride::none;
    if (s == "glass") return ShaderOverride::glass;
    if (s == "mirror") return ShaderOverride::mirror;
    if (s == "procedural") return ShaderOverride::procedural;
    return std::nullopt;
}

/// Image node attached to a material by the texture pass.
struct ImageNode {
    std::string image_ref;
    UvMapping uv;
    friend bool operator==(const ImageNode&, const ImageNode&) = default;
};

/// Target is "<object>", "<object>/<part>", or a reserved shell surface
/// ("shell/floor", "shell/walls", "shell/ceiling").
struct MaterialAssign {
    std::string target;
    MaterialSpec spec;
    ShaderOverride shader_override = ShaderOverride::none;
    std::optional<ImageNode> image;
    friend bool operator==(const MaterialAssign&, const MaterialAssign&) = default;
};

struct TextureBind {
    std::string target;
    std::string image_ref;
    UvMapping uv;
    bool fallback = false;
    friend bool operator==(const TextureBind&, const TextureBind&) = default;
};

enum class LightKind { sun, point, area, spot };

inline std::string to_string(LightKind k) {
    switch (k) {
        case LightKind::sun: return "sun";
        case LightKind::point: return "point";
        case LightKind::area: return "area";
        case LightKind::spot: return "spot";
    }
    return "sun";
}

inline std::optional<LightKind> light_kind_from_string(std::string_view s) {
    if (s == "sun") return LightKind::sun;
    if (s == "point") return LightKind::point;
    if (s == "area") return LightKind::area;
    if (s == "spot") return LightKind::spot;
    return std::nullopt;
}

/// `direction` is the unit vector light travels along; for area lights `size`
/// is the emitter edge length in meters.
struct Light {
    std::string id;
    LightKind kind = LightKind::sun;
    Vec3 position;
    Vec3 direction{0.0, 0.0, -1.0};
    double intensity = 3.0;
    Vec3 color{1.0, 1.0, 1.0};
    double size = 0.0;
    friend bool operator==(const Light&, const Light&) = default;
};

enum class CameraKind { topdown_ortho, perspective };

struct Camera {
    std::string id = "camera";
    CameraKind kind = CameraKind::topdown_ortho;
    Pose pose;
    double scale_or_fov = 1.0;
    friend bool operator==(const Camera&, const Camera&) = default;
};

struct RenderSettings {
    int resolution_x = 1024;
    int resolution_y = 1024;
    int samples = 32;
    double world_strength = 0.3;
    friend bool operator==(const RenderSettings&, const RenderSettings&) = default;
};

using Statement = std::variant<Proxy, Assembly, AssetInstance, MaterialAssign, TextureBind, Light,
                               Camera, RenderSettings>;

inline constexpr std::array<std::string_view, 8> kStatementKinds = {
    "proxy", "assembly", "asset_instance", "material", "texture", "light", "camera", "render_settings"};

inline std::string_view statement_kind(const Statement& s) { return kStatementKinds[s.index()]; }

struct WallSegment {
    std::string id;
    Vec2 a;
    Vec2 b;
    friend bool operator==(const WallSegment&, const WallSegment&) = default;
};

enum class CutoutKind { door, window, opening };

/// A door/window hole on a wall. `offset` is the distance from the wall's
/// start point `a` to the cutout center along the segment.
struct Cutout {
    std::string id;
    CutoutKind kind = CutoutKind::door;
    std::string wall;
    double offset = 0.0;
    double width = 0.9;
    double height = 2.0;
    double sill = 0.0;
    friend bool operator==(const Cutout&, const Cutout&) = default;
};

inline std::string to_string(CutoutKind k) {
    switch (k) {
        case CutoutKind::door: return "door";
        case CutoutKind::window: return "window";
        case CutoutKind::opening: return "opening";
    }
    return "door";
}

/// Floor rectangle [0,width] x [0,depth]; wall segments are interior faces.
struct RoomShell {
    double width = 4.0;
    double depth = 4.0;
    double wall_height = 2.7;
    std::vector<WallSegment> walls;
    std::vector<Cutout> cutouts;
    friend bool operator==(const RoomShell&, const RoomShell&) = default;

    Vec2 center() const noexcept { return {width / 2.0, depth / 2.0}; }
};

/// The four interior wall faces of a rectangular room, counter-clockwise from
/// the south wall.
inline RoomShell rectangular_shell(double width, double depth, double wall_height = 2.7) {
    RoomShell s;
    s.width = width;
    s.depth = depth;
    s.wall_height = wall_height;
    s.walls = {
        {"wall_south", {0.0, 0.0}, {width, 0.0}},
        {"wall_east", {width, 0.0}, {width, depth}},
        {"wall_north", {width, depth}, {0.0, depth}},
        {"wall_west", {0.0, depth}, {0.0, 0.0}},
    };
    return s;
}

struct SceneProgram {
    RoomShell shell;
    std::vector<Statement> statements;
    std::string version = kIrVersion;
    friend bool operator==(const SceneProgram&, const SceneProgram&) = default;
};

// ---------------------------------------------------------------------------
// Object accessors shared by passes, geometry, solver and metrics.

inline bool is_object(const Statement& s) {
    return std::holds_alternative<Proxy>(s) || std::holds_alternative<Assembly>(s) ||
           std::holds_alternative<AssetInstance>(s);
}

inline const ObjectId* object_id(const Statement& s) {
    if (auto* p = std::get_if<Proxy>(&s)) return &p->id;
    if (auto* a = std::get_if<Assembly>(&s)) return &a->id;
    if (auto* i = std::get_if<AssetInstance>(&s)) return &i->id;
    return nullptr;
}

template <class F>
decltype(auto) visit_object(const Statement& s, F&& f) {
    if (auto* p = std::get_if<Proxy>(&s)) return f(*p);
    if (auto* a = std::get_if<Assembly>(&s)) return f(*a);
    return f(std::get<AssetInstance>(s));
}

template <class F>
decltype(auto) visit_object(Statement& s, F&& f) {
    if (auto* p = std::get_if<Proxy>(&s)) return f(*p);
    if (auto* a = std::get_if<Assembly>(&s)) return f(*a);
    return f(std::get<AssetInstance>(s));
}

inline const Pose& object_pose(const Statement& s) {
    return visit_object(s, [](const auto& o) -> const Pose& { return o.pose; });
}
inline Pose& object_pose(Statement& s) {
    return visit_object(s, [](auto& o) -> Pose& { return o.pose; });
}
inline const std::string& object_category(const Statement& s) {
    return visit_object(s, [](const auto& o) -> const std::string& { return o.category; });
}
inline const std::optional<ObjectId>& object_parent(const Statement& s) {
    return visit_object(s, [](const auto& o) -> const std::optional<ObjectId>& { return o.parent; });
}
inline PlacementType object_placement(const Statement& s) {
    return visit_object(s, [](const auto& o) { return o.placement_type; });
}

inline std::vector<const Statement*> objects_of(const SceneProgram& p) {
    std::vector<const Statement*> out;
    for (const auto& s : p.statements)
        if (is_object(s)) out.push_back(&s);
    return out;
}

inline const Statement* find_object(const SceneProgram& p, std::string_view id) {
    for (const auto& s : p.statements)
        if (const ObjectId* oid = object_id(s); oid && *oid == id) return &s;
    return nullptr;
}

inline Statement* find_object(SceneProgram& p, std::string_view id) {
    for (auto& s : p.statements)
        if (const ObjectId* oid = object_id(s); oid && *oid == id) return &s;
    return nullptr;
}

inline bool is_shell_target(std::string_view t) {
    return t == "shell/floor" || t == "shell/walls" || t == "shell/ceiling";
}

/// Resolves a material/texture target; returns an empty string on success or
/// a reason otherwise.
inline std::string check_target(const SceneProgram& p, std::string_view target) {
    if (is_shell_target(target)) return {};
    const auto slash = target.find('/');
    const std::string_view obj = target.substr(0, slash);
    const Statement* s = find_object(p, obj);
    if (!s) return "unknown object '" + std::string(obj) + "'";
    if (slash == std::string_view::npos) return {};
    const std::string_view part = target.substr(slash + 1);
    const auto* a = std::get_if<Assembly>(s);
    if (!a) return "object '" + std::string(obj) + "' has no parts";
    for (const auto& pt : a->parts)
        if (pt.name == part) return {};
    return "object '" + std::string(obj) + "' has no part '" + std::string(part) + "'";
}

// ---------------------------------------------------------------------------
// Validation

inline void validate(const SceneProgram& p) {
    if (p.version != kIrVersion) throw ParseError("/version: unsupported version '" + p.version + "'");
    if (!(p.shell.width > 0.0) || !(p.shell.depth > 0.0) || !(p.shell.wall_height > 0.0))
        throw StructuralError("/shell: extents must be positive");

    std::set<std::string> ids;
    std::set<std::string> walls;
    for (const auto& w : p.shell.walls)
        if (!walls.insert(w.id).second) throw StructuralError("/shell/walls: duplicate wall id '" + w.id + "'");
    for (const auto& c : p.shell.cutouts)
        if (!walls.count(c.wall)) throw LinkError("/shell/cutouts/" + c.id + ": unknown wall '" + c.wall + "'");

    auto positive = [](Vec3 v) { return v.x > 0.0 && v.y > 0.0 && v.z > 0.0; };
    auto yaw_ok = [](double y) { return y >= -std::numbers::pi && y < std::numbers::pi; };
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };

    int cameras = 0;
    int settings = 0;
    for (std::size_t i = 0; i < p.statements.size(); ++i) {
        const auto& s = p.statements[i];
        const std::string path = "/statements/" + std::to_string(i);
        if (is_object(s)) {
            const ObjectId& id = *object_id(s);
            if (id.empty()) throw ParseError(path + "/id: empty");
            if (!ids.insert(id).second) throw ConflictError(path + "/id: duplicate object id '" + id + "'");
            if (!yaw_ok(object_pose(s).yaw)) throw ParseError(path + "/pose/yaw: not normalized to [-pi, pi)");
        }
        if (auto* px = std::get_if<Proxy>(&s)) {
            if (!positive(px->size)) throw ParseError(path + "/size: must be positive");
        } else if (auto* as = std::get_if<Assembly>(&s)) {
            if (as->parts.empty()) throw ParseError(path + "/parts: empty");
            std::set<std::string> names;
            for (std::size_t k = 0; k < as->parts.size(); ++k) {
                if (!positive(as->parts[k].size))
                    throw ParseError(path + "/parts/" + std::to_string(k) + "/size: must be positive");
                if (!names.insert(as->parts[k].name).second)
                    throw ParseError(path + "/parts/" + std::to_string(k) + "/name: duplicate");
            }
        } else if (auto* ai = std::get_if<AssetInstance>(&s)) {
            if (!positive(ai->canonical_size) || !positive(ai->scale))
                throw ParseError(path + ": asset size and scale must be positive");
        } else if (auto* m = std::get_if<MaterialAssign>(&s)) {
            const auto& sp = m->spec;
            if (!unit(sp.base_color.x) || !unit(sp.base_color.y) || !unit(sp.base_color.z))
                throw ParseError(path + "/spec/base_color: outside [0,1]");
            if (!unit(sp.roughness)) throw ParseError(path + "/spec/roughness: outside [0,1]");
            if (!unit(sp.metallic)) throw ParseError(path + "/spec/metallic: outside [0,1]");
            if (!(sp.specular >= 0.0)) throw ParseError(path + "/spec/specular: negative");
        } else if (auto* l = std::get_if<Light>(&s)) {
            if (l->id.empty()) throw ParseError(path + "/id: empty");
            if (!ids.insert(l->id).second) throw ConflictError(path + "/id: duplicate id '" + l->id + "'");
            if (!(l->intensity >= 0.0)) throw ParseError(path + "/intensity: negative");
        } else if (auto* c = std::get_if<Camera>(&s)) {
            if (++cameras > 1) throw StructuralError(path + ": more than one camera");
            if (!ids.insert(c->id).second) throw ConflictError(path + "/id: duplicate id '" + c->id + "'");
            if (!(c->scale_or_fov > 0.0)) throw ParseError(path + "/scale_or_fov: must be positive");
        } else if (auto* r = std::get_if<RenderSettings>(&s)) {
            if (++settings > 1) throw StructuralError(path + ": more than one render_settings");
            if (r->resolution_x <= 0 || r->resolution_y <= 0 || r->samples <= 0)
                throw ParseError(path + ": resolution and samples must be positive");
        }
    }

    for (std::size_t i = 0; i < p.statements.size(); ++i) {
        const auto& s = p.statements[i];
        const std::string path = "/statements/" + std::to_string(i);
        if (is_object(s)) {
            const auto& parent = object_parent(s);
            if (parent && !find_object(p, *parent))
                throw LinkError(path + "/parent: unknown object '" + *parent + "'");
            if (object_placement(s) == PlacementType::surface && !parent)
                throw StructuralError(path + ": surface object without parent");
        } else if (auto* m = std::get_if<MaterialAssign>(&s)) {
            if (auto why = check_target(p, m->target); !why.empty()) throw LinkError(path + "/target: " + why);
        } else if (auto* t = std::get_if<TextureBind>(&s)) {
            if (auto why = check_target(p, t->target); !why.empty()) throw LinkError(path + "/target: " + why);
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline json vec(Vec3 v) { return json::array({v.x, v.y, v.z}); }
inline json vec(Vec2 v) { return json::array({v.x, v.y}); }
inline json pose_json(const Pose& p) { return {{"position", vec(p.position)}, {"yaw", p.yaw}}; }

inline json uv_json(const UvMapping& uv) {
    return {{"mode", uv.mode}, {"scale", vec(uv.scale)}, {"rotation", uv.rotation}};
}

inline json part_json(const Part& p) {
    return {{"name", p.name},
            {"primitive", to_string(p.primitive)},
            {"size", vec(p.size)},
            {"offset", vec(p.offset)},
            {"rotation", vec(p.rotation)}};
}

inline json spec_json(const MaterialSpec& m) {
    return {{"material_type", m.material_type},
            {"base_color", vec(m.base_color)},
            {"roughness", m.roughness},
            {"metallic", m.metallic},
            {"specular", m.specular}};
}

inline void put_parent(json& j, const std::optional<ObjectId>& parent) {
    if (parent) j["parent"] = *parent;
}

// Strict reader that reports JSON-pointer-like paths on failure.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected object");
    }

    [[noreturn]] void fail(const std::string& why) const { throw ParseError(path_ + ": " + why); }

    std::string at(std::string_view key) const { return path_ + "/" + std::string(key); }

    void allow(std::initializer_list<std::string_view> keys) const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
                throw ParseError(at(it.key()) + ": unknown field");
        }
    }

    const json& req(std::string_view key) const {
        auto it = j_.find(std::string(key));
        if (it == j_.end()) throw ParseError(at(key) + ": missing required field");
        return *it;
    }

    bool has(std::string_view key) const { return j_.contains(std::string(key)); }

    std::string str(std::string_view key) const {
        const json& v = req(key);
        if (!v.is_string()) throw ParseError(at(key) + ": expected string");
        return v.get<std::string>();
    }

    std::optional<std::string> opt_str(std::string_view key) const {
        if (!has(key)) return std::nullopt;
        return str(key);
    }

    double num(std::string_view key) const { return number(req(key), at(key)); }

    double num_or(std::string_view key, double dflt) const { return has(key) ? num(key) : dflt; }

    int integer(std::string_view key) const {
        const json& v = req(key);
        if (!v.is_number_integer()) throw ParseError(at(key) + ": expected integer");
        return v.get<int>();
    }

    bool boolean_or(std::string_view key, bool dflt) const {
        if (!has(key)) return dflt;
        const json& v = req(key);
        if (!v.is_boolean()) throw ParseError(at(key) + ": expected boolean");
        return v.get<bool>();
    }

    Vec3 vec3(std::string_view key) const { return to_vec3(req(key), at(key)); }
    Vec2 vec2(std::string_view key) const {
        const json& v = req(key);
        if (!v.is_array() || v.size() != 2) throw ParseError(at(key) + ": expected array of 2 numbers");
        return {number(v[0], at(key) + "/0"), number(v[1], at(key) + "/1")};
    }

    const json& array(std::string_view key) const {
        const json& v = req(key);
        if (!v.is_array()) throw ParseError(at(key) + ": expected array");
        return v;
    }

    static double number(const json& v, const std::string& path) {
        if (!v.is_number()) throw ParseError(path + ": expected number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ParseError(path + ": not finite");
        return d;
    }

    static Vec3 to_vec3(const json& v, const std::string& path) {
        if (!v.is_array() || v.size() != 3) throw ParseError(path + ": expected array of 3 numbers");
        return {number(v[0], path + "/0"), number(v[1], path + "/1"), number(v[2], path + "/2")};
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
};

inline Pose read_pose(const Reader& r, std::string_view key) {
    Reader p(r.req(key), r.at(key));
    p.allow({"position", "yaw"});
    return {p.vec3("position"), p.num("yaw")};
}

inline UvMapping read_uv(const json& j, const std::string& path) {
    Reader r(j, path);
    r.allow({"mode", "scale", "rotation"});
    UvMapping uv;
    uv.mode = r.str("mode");
    if (uv.mode != "box" && uv.mode != "planar") throw ParseError(r.at("mode") + ": expected box or planar");
    uv.scale = r.vec2("scale");
    uv.rotation = r.num("rotation");
    return uv;
}

inline MaterialSpec read_spec(const json& j, const std::string& path) {
    Reader r(j, path);
    r.allow({"material_type", "base_color", "roughness", "metallic", "specular"});
    MaterialSpec m;
    m.material_type = r.str("material_type");
    m.base_color = r.vec3("base_color");
    m.roughness = r.num("roughness");
    m.metallic = r.num("metallic");
    m.specular = r.num("specular");
    return m;
}

inline Part read_part(const json& j, const std::string& path) {
    Reader r(j, path);
    r.allow({"name", "primitive", "size", "offset", "rotation"});
    Part p;
    p.name = r.str("name");
    auto prim = primitive_from_string(r.str("primitive"));
    if (!prim) throw ParseError(r.at("primitive") + ": unknown primitive");
    p.primitive = *prim;
    p.size = r.vec3("size");
    p.offset = r.vec3("offset");
    p.rotation = r.has("rotation") ? r.vec3("rotation") : Vec3{};
    return p;
}

inline PlacementType read_placement(const Reader& r) {
    auto pt = placement_from_string(r.str("placement_type"));
    if (!pt) throw ParseError(r.at("placement_type") + ": unknown placement type");
    return *pt;
}

}  // namespace detail

inline json statement_to_json(const Statement& s) {
    using namespace detail;
    json j;
    j["kind"] = std::string(statement_kind(s));
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Proxy>) {
                j["id"] = v.id;
                j["category"] = v.category;
                j["pose"] = pose_json(v.pose);
                j["size"] = vec(v.size);
                j["placement_type"] = to_string(v.placement_type);
                put_parent(j, v.parent);
            } else if constexpr (std::is_same_v<T, Assembly>) {
                j["id"] = v.id;
                j["category"] = v.category;
                j["pose"] = pose_json(v.pose);
                j["parts"] = json::array();
                for (const auto& p : v.parts) j["parts"].push_back(part_json(p));
                j["placement_type"] = to_string(v.placement_type);
                put_parent(j, v.parent);
            } else if constexpr (std::is_same_v<T, AssetInstance>) {
                j["id"] = v.id;
                j["category"] = v.category;
                j["asset_id"] = v.asset_id;
                j["mesh_ref"] = v.mesh_ref;
                j["pose"] = pose_json(v.pose);
                j["canonical_size"] = vec(v.canonical_size);
                j["scale"] = vec(v.scale);
                j["placement_type"] = to_string(v.placement_type);
                put_parent(j, v.parent);
            } else if constexpr (std::is_same_v<T, MaterialAssign>) {
                j["target"] = v.target;
                j["spec"] = spec_json(v.spec);
                j["shader_override"] = to_string(v.shader_override);
                if (v.image) j["image"] = {{"image_ref", v.image->image_ref}, {"uv", uv_json(v.image->uv)}};
            } else if constexpr (std::is_same_v<T, TextureBind>) {
                j["target"] = v.target;
                j["image_ref"] = v.image_ref;
                j["uv"] = uv_json(v.uv);
                j["fallback"] = v.fallback;
            } else if constexpr (std::is_same_v<T, Light>) {
                j["id"] = v.id;
                j["light_kind"] = to_string(v.kind);
                j["position"] = vec(v.position);
                j["direction"] = vec(v.direction);
                j["intensity"] = v.intensity;
                j["color"] = vec(v.color);
                j["size"] = v.size;
            } else if constexpr (std::is_same_v<T, Camera>) {
                j["id"] = v.id;
                j["camera_kind"] = v.kind == CameraKind::topdown_ortho ? "topdown_ortho" : "perspective";
                j["pose"] = pose_json(v.pose);
                j["scale_or_fov"] = v.scale_or_fov;
            } else if constexpr (std::is_same_v<T, RenderSettings>) {
                j["resolution"] = json::array({v.resolution_x, v.resolution_y});
                j["samples"] = v.samples;
                j["world_strength"] = v.world_strength;
            }
        },
        s);
    return j;
}

inline json shell_to_json(const RoomShell& shell) {
    using detail::vec;
    json walls = json::array();
    for (const auto& w : shell.walls) walls.push_back({{"id", w.id}, {"a", vec(w.a)}, {"b", vec(w.b)}});
    json cutouts = json::array();
    for (const auto& c : shell.cutouts)
        cutouts.push_back({{"id", c.id},
                           {"kind", to_string(c.kind)},
                           {"wall", c.wall},
                           {"offset", c.offset},
                           {"width", c.width},
                           {"height", c.height},
                           {"sill", c.sill}});
    return {{"width", shell.width},
            {"depth", shell.depth},
            {"wall_height", shell.wall_height},
            {"walls", walls},
            {"cutouts", cutouts}};
}

inline json to_json(const SceneProgram& p) {
    json statements = json::array();
    for (const auto& s : p.statements) statements.push_back(statement_to_json(s));
    return {{"version", p.version}, {"shell", shell_to_json(p.shell)}, {"statements", statements}};
}

inline std::string serialize(const SceneProgram& p) { return canonical_dump(to_json(p)); }

inline RoomShell shell_from_json(const json& j, const std::string& path) {
    using detail::Reader;
    Reader r(j, path);
    r.allow({"width", "depth", "wall_height", "walls", "cutouts"});
    RoomShell s;
    s.width = r.num("width");
    s.depth = r.num("depth");
    s.wall_height = r.num("wall_height");
    const json& walls = r.array("walls");
    for (std::size_t i = 0; i < walls.size(); ++i) {
        Reader w(walls[i], r.at("walls") + "/" + std::to_string(i));
        w.allow({"id", "a", "b"});
        s.walls.push_back({w.str("id"), w.vec2("a"), w.vec2("b")});
    }
    if (r.has("cutouts")) {
        const json& cs = r.array("cutouts");
        for (std::size_t i = 0; i < cs.size(); ++i) {
            Reader c(cs[i], r.at("cutouts") + "/" + std::to_string(i));
            c.allow({"id", "kind", "wall", "offset", "width", "height", "sill"});
            Cutout cut;
            cut.id = c.str("id");
            const std::string kind = c.str("kind");
            if (kind == "door") cut.kind = CutoutKind::door;
            else if (kind == "window") cut.kind = CutoutKind::window;
            else if (kind == "opening") cut.kind = CutoutKind::opening;
            else throw ParseError(c.at("kind") + ": unknown cutout kind");
            cut.wall = c.str("wall");
            cut.offset = c.num("offset");
            cut.width = c.num("width");
            cut.height = c.num("height");
            cut.sill = c.num_or("sill", 0.0);
            s.cutouts.push_back(cut);
        }
    }
    return s;
}

inline Statement statement_from_json(const json& j, const std::string& path) {
    using namespace detail;
    Reader r(j, path);
    const std::string kind = r.str("kind");
    if (kind == "proxy") {
        r.allow({"kind", "id", "category", "pose", "size", "placement_type", "parent"});
        Proxy p;
        p.id = r.str("id");
        p.category = r.str("category");
        p.pose = read_pose(r, "pose");
        p.size = r.vec3("size");
        p.placement_type = read_placement(r);
        p.parent = r.opt_str("parent");
        return p;
    }
    if (kind == "assembly") {
        r.allow({"kind", "id", "category", "pose", "parts", "placement_type", "parent"});
        Assembly a;
        a.id = r.str("id");
        a.category = r.str("category");
        a.pose = read_pose(r, "pose");
        const json& parts = r.array("parts");
        for (std::size_t i = 0; i < parts.size(); ++i)
            a.parts.push_back(read_part(parts[i], r.at("parts") + "/" + std::to_string(i)));
        a.placement_type = read_placement(r);
        a.parent = r.opt_str("parent");
        return a;
    }
    if (kind == "asset_instance") {
        r.allow({"kind", "id", "category", "asset_id", "mesh_ref", "pose", "canonical_size", "scale",
                 "placement_type", "parent"});
        AssetInstance a;
        a.id = r.str("id");
        a.category = r.str("category");
        a.asset_id = r.str("asset_id");
        a.mesh_ref = r.str("mesh_ref");
        a.pose = read_pose(r, "pose");
        a.canonical_size = r.vec3("canonical_size");
        a.scale = r.vec3("scale");
        a.placement_type = read_placement(r);
        a.parent = r.opt_str("parent");
        return a;
    }
    if (kind == "material") {
        r.allow({"kind", "target", "spec", "shader_override", "image"});
        MaterialAssign m;
        m.target = r.str("target");
        m.spec = read_spec(r.req("spec"), r.at("spec"));
        auto ov = shader_override_from_string(r.str("shader_override"));
        if (!ov) throw ParseError(r.at("shader_override") + ": unknown override");
        m.shader_override = *ov;
        if (r.has("image")) {
            Reader im(r.req("image"), r.at("image"));
            im.allow({"image_ref", "uv"});
            m.image = ImageNode{im.str("image_ref"), read_uv(im.req("uv"), im.at("uv"))};
        }
        return m;
    }
    if (kind == "texture") {
        r.allow({"kind", "target", "image_ref", "uv", "fallback"});
        TextureBind t;
        t.target = r.str("target");
        t.image_ref = r.str("image_ref");
        t.uv = read_uv(r.req("uv"), r.at("uv"));
        t.fallback = r.boolean_or("fallback", false);
        return t;
    }
    if (kind == "light") {
        r.allow({"kind", "id", "light_kind", "position", "direction", "intensity", "color", "size"});
        Light l;
        l.id = r.str("id");
        auto lk = light_kind_from_string(r.str("light_kind"));
        if (!lk) throw ParseError(r.at("light_kind") + ": unknown light kind");
        l.kind = *lk;
        l.position = r.vec3("position");
        l.direction = r.vec3("direction");
        l.intensity = r.num("intensity");
        l.color = r.vec3("color");
        l.size = r.num_or("size", 0.0);
        return l;
    }
    if (kind == "camera") {
        r.allow({"kind", "id", "camera_kind", "pose", "scale_or_fov"});
        Camera c;
        c.id = r.str("id");
        const std::string ck = r.str("camera_kind");
        if (ck == "topdown_ortho") c.kind = CameraKind::topdown_ortho;
        else if (ck == "perspective") c.kind = CameraKind::perspective;
        else throw ParseError(r.at("camera_kind") + ": unknown camera kind");
        c.pose = read_pose(r, "pose");
        c.scale_or_fov = r.num("scale_or_fov");
        return c;
    }
    if (kind == "render_settings") {
        r.allow({"kind", "resolution", "samples", "world_strength"});
        RenderSettings rs;
        const json& res = r.array("resolution");
        if (res.size() != 2 || !res[0].is_number_integer() || !res[1].is_number_integer())
            throw ParseError(r.at("resolution") + ": expected two integers");
        rs.resolution_x = res[0].get<int>();
        rs.resolution_y = res[1].get<int>();
        rs.samples = r.integer("samples");
        rs.world_strength = r.num_or("world_strength", rs.world_strength);
        return rs;
    }
    throw ParseError(r.at("kind") + ": unknown statement kind '" + kind + "'");
}

/// Parses and validates a program from its JSON form.
inline SceneProgram program_from_json(const json& j) {
    detail::Reader r(j, "");
    r.allow({"version", "shell", "statements"});
    SceneProgram p;
    p.version = r.str("version");
    p.shell = shell_from_json(r.req("shell"), "/shell");
    const json& st = r.array("statements");
    for (std::size_t i = 0; i < st.size(); ++i)
        p.statements.push_back(statement_from_json(st[i], "/statements/" + std::to_string(i)));
    validate(p);
    return p;
}

inline SceneProgram parse(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("/: invalid JSON: ") + e.what());
    }
    return program_from_json(j);
}

// ---------------------------------------------------------------------------
// Hashes

/// Projection of a program onto its geometry-bearing fields: shell, object
/// ids, poses, sizes, parts and asset scales. Rewrite passes that only touch
/// appearance must leave this unchanged.
inline json geometry_projection(const SceneProgram& p) {
    json objs = json::array();
    for (const auto& s : p.statements) {
        if (!is_object(s)) continue;
        json j = statement_to_json(s);
        j.erase("category");
        objs.push_back(std::move(j));
    }
    return {{"shell", shell_to_json(p.shell)}, {"objects", objs}};
}

inline std::string geometry_hash(const SceneProgram& p) { return hex64(fnv1a(geometry_projection(p).dump())); }

inline std::string program_hash(const SceneProgram& p) { return hex64(fnv1a(to_json(p).dump())); }

}  // namespace car
