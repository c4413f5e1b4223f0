#pragma once

// Lowering of a scene program: a Blender Python script, and a top-down
// preview raster with a per-pixel label map for offline critique and tests.

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "car/geometry.hpp"
#include "car/image.hpp"
#include "car/passes.hpp"
#include "car/program.hpp"

namespace car {

// ---------------------------------------------------------------------------
// Preview

/// Label values below kFirstObjectLabel are reserved.
inline constexpr std::uint16_t kLabelFloor = 0;
inline constexpr std::uint16_t kLabelWall = 1;
inline constexpr std::uint16_t kLabelOpening = 2;
inline constexpr std::uint16_t kFirstObjectLabel = 3;

inline constexpr double kPreviewWallThickness = 0.06;

struct Preview {
    RgbImage image;
    std::vector<std::uint16_t> labels;   // row-major like image
    std::vector<ObjectId> legend;        // legend[k] is label kFirstObjectLabel + k
    double px_per_m = 50.0;

    std::uint16_t label(int x, int y) const {
        return labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(image.width) + static_cast<std::size_t>(x)];
    }

    std::size_t pixel_count(std::string_view id) const {
        const auto it = std::find(legend.begin(), legend.end(), id);
        if (it == legend.end()) return 0;
        const auto want = static_cast<std::uint16_t>(kFirstObjectLabel + (it - legend.begin()));
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), want));
    }

    /// World coordinates of a pixel center; row 0 is the far (max y) edge.
    static Vec2 pixel_center(int x, int y, int height, double px_per_m) {
        return {(x + 0.5) / px_per_m, (height - y - 0.5) / px_per_m};
    }

    json legend_json() const {
        json j = json::object();
        j["floor"] = kLabelFloor;
        j["wall"] = kLabelWall;
        j["opening"] = kLabelOpening;
        for (std::size_t k = 0; k < legend.size(); ++k) j[legend[k]] = kFirstObjectLabel + k;
        return j;
    }
};

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr std::array<Rgb, 12> kPalette = {{{230, 25, 75},
                                                  {60, 180, 75},
                                                  {255, 225, 25},
                                                  {0, 130, 200},
                                                  {245, 130, 48},
                                                  {145, 30, 180},
                                                  {70, 240, 240},
                                                  {240, 50, 230},
                                                  {210, 245, 60},
                                                  {250, 190, 212},
                                                  {0, 128, 128},
                                                  {170, 110, 40}}};

inline Rgb category_color(std::string_view category) { return kPalette[fnv1a(category) % kPalette.size()]; }

namespace detail {

template <class Fn>
void for_pixels_in(const Footprint& f, int width, int height, double ppm, Fn&& fn) {
    const Vec2 h = f.aabb_half();
    const int x0 = std::max(0, static_cast<int>(std::floor((f.center.x - h.x) * ppm)) - 1);
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil((f.center.x + h.x) * ppm)) + 1);
    const int ytop = std::max(0, static_cast<int>(std::floor(height - (f.center.y + h.y) * ppm)) - 1);
    const int ybot = std::min(height - 1, static_cast<int>(std::ceil(height - (f.center.y - h.y) * ppm)) + 1);
    for (int y = ytop; y <= ybot; ++y)
        for (int x = x0; x <= x1; ++x)
            if (f.contains_point(Preview::pixel_center(x, y, height, ppm), 0.0)) fn(x, y);
}

inline Footprint segment_band(Vec2 a, Vec2 b, double thickness) {
    const Vec2 d = b - a;
    return {(a + b) * 0.5, {norm(d) / 2.0, thickness / 2.0}, std::atan2(d.y, d.x)};
}

}  // namespace detail

/// Orthographic top-down rasterization. A pixel belongs to a footprint when
/// its center lies inside it; objects are painted bottom to top so the label
/// map records the topmost object.
inline Preview render_preview(const SceneProgram& program, double px_per_m = 50.0) {
    if (!(px_per_m > 0.0)) throw ConfigError("preview resolution must be positive");
    const RoomShell& shell = program.shell;
    const int width = std::max(1, static_cast<int>(std::ceil(shell.width * px_per_m - 1e-9)));
    const int height = std::max(1, static_cast<int>(std::ceil(shell.depth * px_per_m - 1e-9)));
    Preview p;
    p.px_per_m = px_per_m;
    p.image = RgbImage(width, height, {238, 238, 232});
    p.labels.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), kLabelFloor);
    auto paint = [&](const Footprint& f, Rgb color, std::uint16_t label) {
        detail::for_pixels_in(f, width, height, px_per_m, [&](int x, int y) {
            p.image.set(x, y, color);
            p.labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] = label;
        });
    };

    for (const auto& w : shell.walls) {
        const Vec2 d = w.b - w.a;
        const double len = norm(d);
        if (len <= 0.0) continue;
        const Vec2 inward = Vec2{-d.y, d.x} * (kPreviewWallThickness / 2.0 / len);
        paint(detail::segment_band(w.a + inward, w.b + inward, kPreviewWallThickness), {60, 60, 60}, kLabelWall);
    }
    for (const auto& c : shell.cutouts) {
        const auto it = std::find_if(shell.walls.begin(), shell.walls.end(), [&](const auto& w) { return w.id == c.wall; });
        if (it == shell.walls.end()) continue;
        const Vec2 d = it->b - it->a;
        const double len = norm(d);
        if (len <= 0.0) continue;
        const Vec2 u = d * (1.0 / len);
        const Vec2 inward = Vec2{-u.y, u.x} * (kPreviewWallThickness / 2.0);
        const Vec2 mid = it->a + u * c.offset + inward;
        const Rgb color = c.kind == CutoutKind::window ? Rgb{90, 160, 235} : Rgb{150, 100, 50};
        paint(detail::segment_band(mid - u * (c.width / 2.0), mid + u * (c.width / 2.0), kPreviewWallThickness), color,
              kLabelOpening);
    }

    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < program.statements.size(); ++i)
        if (is_object(program.statements[i])) order.push_back({vertical_extent(program.statements[i]).second, i});
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [_, i] : order) {
        const Statement& s = program.statements[i];
        const auto label = static_cast<std::uint16_t>(kFirstObjectLabel + p.legend.size());
        p.legend.push_back(*object_id(s));
        const Rgb color = category_color(object_category(s));
        if (const auto* a = std::get_if<Assembly>(&s)) {
            for (const auto& part : a->parts) paint(part_footprint(a->pose, part), color, label);
        } else {
            paint(footprint_of(s), color, label);
        }
    }
    return p;
}

inline void write_preview(const Preview& p, const std::filesystem::path& png, const std::filesystem::path& labels) {
    write_png(png, p.image);
    if (!labels.empty()) {
        write_text(labels, encode_png_gray16(p.image.width, p.image.height, p.labels));
        auto legend = labels;
        legend.replace_extension(".json");
        write_text(legend, canonical_dump(p.legend_json()));
    }
}

// ---------------------------------------------------------------------------
// Blender script emission

enum class ShimMode { self_contained, shim_import };

struct EmitOptions {
    ShimMode mode = ShimMode::self_contained;
    // Directory the script will live in; file references are emitted
    // relative to it.
    std::filesystem::path script_dir = ".";
    // Roots that relative texture and mesh references resolve against.
    std::filesystem::path texture_root = ".";
    std::filesystem::path asset_root = ".";
    bool embed_textures = false;
};

namespace detail {

inline std::string py(double v) { return format_number(v); }
inline std::string py(int v) { return std::to_string(v); }
inline std::string py(bool v) { return v ? "True" : "False"; }
inline std::string py(const std::string& s) { return json(s).dump(); }
inline std::string py(const char* s) { return json(std::string(s)).dump(); }
inline std::string py(Vec2 v) { return "(" + py(v.x) + ", " + py(v.y) + ")"; }
inline std::string py(Vec3 v) { return "(" + py(v.x) + ", " + py(v.y) + ", " + py(v.z) + ")"; }

inline std::string kw(std::initializer_list<std::pair<std::string_view, std::string>> args) {
    std::string out;
    for (const auto& [k, v] : args) {
        if (!out.empty()) out += ", ";
        out += std::string(k) + "=" + v;
    }
    return out;
}

inline std::string rel_path(const std::filesystem::path& target, const std::filesystem::path& base) {
    std::error_code ec;
    const auto abs_target = std::filesystem::absolute(target, ec);
    const auto abs_base = std::filesystem::absolute(base, ec);
    return abs_target.lexically_normal().lexically_relative(abs_base.lexically_normal()).generic_string();
}

inline std::string base64(std::string_view in) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    std::size_t i = 0;
    for (; i + 2 < in.size(); i += 3) {
        const auto n = (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8) |
                       static_cast<unsigned char>(in[i + 2]);
        for (int s : {18, 12, 6, 0}) out += kAlphabet[(n >> s) & 63];
    }
    if (i < in.size()) {
        unsigned n = static_cast<unsigned char>(in[i]) << 16;
        if (i + 1 < in.size()) n |= static_cast<unsigned char>(in[i + 1]) << 8;
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += i + 1 < in.size() ? kAlphabet[(n >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

inline constexpr std::string_view kPrelude = R"PY(import math
import os
import sys
import tempfile
import traceback
from contextlib import contextmanager

import bpy
from mathutils import Vector

_OBJECTS = {}
_IMAGES = {}


@contextmanager
def stmt(sid):
    try:
        yield
    except Exception as exc:
        raise RuntimeError("statement %s failed: %s" % (sid, exc)) from exc


def reset_scene():
    bpy.ops.wm.read_factory_settings(use_empty=True)


def _link(obj):
    bpy.context.scene.collection.objects.link(obj)
    return obj


def _primitive(name, primitive, size):
    if primitive == "box":
        bpy.ops.mesh.primitive_cube_add(size=1.0)
        scale = size
    elif primitive == "cylinder":
        bpy.ops.mesh.primitive_cylinder_add(radius=0.5, depth=1.0)
        scale = size
    elif primitive == "sphere":
        bpy.ops.mesh.primitive_uv_sphere_add(radius=0.5)
        scale = size
    elif primitive == "cone":
        bpy.ops.mesh.primitive_cone_add(radius1=0.5, radius2=0.0, depth=1.0)
        scale = size
    elif primitive == "plane":
        bpy.ops.mesh.primitive_plane_add(size=1.0)
        scale = (size[0], size[1], 1.0)
    elif primitive == "torus":
        # Outer diameter 1, tube thickness 0.5 before scaling.
        bpy.ops.mesh.primitive_torus_add(major_radius=0.25, minor_radius=0.25)
        scale = (size[0], size[1], size[2] / 0.5)
    else:
        raise ValueError("unknown primitive " + primitive)
    obj = bpy.context.active_object
    obj.name = name
    obj.scale = scale
    return obj


def build_shell(width, depth, wall_height, walls, cutouts, thickness=0.1):
    floor = _primitive("shell/floor", "plane", (width, depth, 0.0))
    floor.location = (width / 2.0, depth / 2.0, 0.0)
    by_id = {}
    for wid, a, b in walls:
        dx, dy = b[0] - a[0], b[1] - a[1]
        length = math.hypot(dx, dy)
        wall = _primitive("shell/walls/" + wid, "box", (length + 2.0 * thickness, thickness, wall_height))
        nx, ny = dy / length, -dx / length
        wall.location = ((a[0] + b[0]) / 2.0 + nx * thickness / 2.0,
                         (a[1] + b[1]) / 2.0 + ny * thickness / 2.0, wall_height / 2.0)
        wall.rotation_euler = (0.0, 0.0, math.atan2(dy, dx))
        by_id[wid] = (wall, a, (dx / length, dy / length), (nx, ny))
    for cut in cutouts:
        wall, a, u, n = by_id[cut["wall"]]
        cutter = _primitive("cutter/" + cut["id"], "box", (cut["width"], thickness * 4.0, cut["height"]))
        cutter.location = (a[0] + u[0] * cut["offset"] + n[0] * thickness / 2.0,
                           a[1] + u[1] * cut["offset"] + n[1] * thickness / 2.0,
                           cut["sill"] + cut["height"] / 2.0)
        cutter.rotation_euler = (0.0, 0.0, math.atan2(u[1], u[0]))
        mod = wall.modifiers.new("cut_" + cut["id"], "BOOLEAN")
        mod.operation = "DIFFERENCE"
        mod.object = cutter
        cutter.hide_render = True
        cutter.display_type = "WIRE"


def build_object(oid, category, position, yaw, size, parent=None):
    obj = _primitive(oid, "box", size)
    obj.location = (position[0], position[1], position[2] + size[2] / 2.0)
    obj.rotation_euler = (0.0, 0.0, yaw)
    obj["category"] = category
    if parent:
        obj["support"] = parent
    _OBJECTS[oid] = [obj]


def build_assembly(oid, category, position, yaw, parts, parent=None):
    root = _link(bpy.data.objects.new(oid, None))
    root.location = position
    root.rotation_euler = (0.0, 0.0, yaw)
    root["category"] = category
    if parent:
        root["support"] = parent
    members = [root]
    for name, primitive, size, offset, rotation in parts:
        part = _primitive(oid + "/" + name, primitive, size)
        part.parent = root
        part.location = offset
        part.rotation_euler = rotation
        members.append(part)
    _OBJECTS[oid] = members


def build_asset(oid, category, mesh_path, position, yaw, canonical_size, scale, parent=None):
    before = set(bpy.data.objects)
    ext = os.path.splitext(mesh_path)[1].lower()
    if ext == ".obj":
        bpy.ops.wm.obj_import(filepath=mesh_path, forward_axis="Y", up_axis="Z")
    elif ext in (".glb", ".gltf"):
        bpy.ops.import_scene.gltf(filepath=mesh_path)
    elif ext == ".ply":
        bpy.ops.wm.ply_import(filepath=mesh_path)
    else:
        raise ValueError("unsupported mesh format " + ext)
    root = _link(bpy.data.objects.new(oid, None))
    members = [root]
    for obj in set(bpy.data.objects) - before:
        if obj is root:
            continue
        obj.parent = root
        members.append(obj)
    root.location = position
    root.rotation_euler = (0.0, 0.0, yaw)
    root.scale = scale
    root["category"] = category
    if parent:
        root["support"] = parent
    _OBJECTS[oid] = members


def _targets(target):
    if target in _OBJECTS:
        found = _OBJECTS[target]
    elif target.startswith("shell/"):
        found = [o for o in bpy.data.objects if o.name == target or o.name.startswith(target + "/")]
    else:
        found = [o for o in bpy.data.objects if o.name == target]
    meshes = [o for o in found if o.type == "MESH"]
    if not meshes:
        raise LookupError("no mesh objects for target " + target)
    return meshes


def _image(ref):
    if ref not in _IMAGES:
        _IMAGES[ref] = bpy.data.images.load(ref, check_existing=True)
    return _IMAGES[ref]


def _image_node(mat, ref, uv):
    nodes = mat.node_tree.nodes
    links = mat.node_tree.links
    bsdf = nodes.get("Principled BSDF")
    if ref == "builtin:checker":
        tex = nodes.new("ShaderNodeTexChecker")
        tex.inputs["Scale"].default_value = 8.0
    else:
        tex = nodes.new("ShaderNodeTexImage")
        tex.image = _image(ref)
        if uv["mode"] == "box":
            tex.projection = "BOX"
    coords = nodes.new("ShaderNodeTexCoord")
    mapping = nodes.new("ShaderNodeMapping")
    mapping.inputs["Scale"].default_value = (uv["scale"][0], uv["scale"][1], 1.0)
    mapping.inputs["Rotation"].default_value = (0.0, 0.0, uv["rotation"])
    links.new(coords.outputs["UV" if uv["mode"] == "planar" else "Object"], mapping.inputs["Vector"])
    links.new(mapping.outputs["Vector"], tex.inputs["Vector"])
    links.new(tex.outputs["Color"], bsdf.inputs["Base Color"])


def _input(bsdf, *names):
    for name in names:
        if name in bsdf.inputs:
            return bsdf.inputs[name]
    return None


def bind_material(target, material_type, base_color, roughness, metallic, specular, override="none",
                  image=None, uv=None):
    mat = bpy.data.materials.new(target.replace("/", "_"))
    mat.use_nodes = True
    nodes = mat.node_tree.nodes
    links = mat.node_tree.links
    bsdf = nodes.get("Principled BSDF")
    bsdf.inputs["Base Color"].default_value = (base_color[0], base_color[1], base_color[2], 1.0)
    bsdf.inputs["Roughness"].default_value = roughness
    bsdf.inputs["Metallic"].default_value = metallic
    spec = _input(bsdf, "Specular IOR Level", "Specular")
    if spec is not None:
        spec.default_value = specular
    if override == "glass":
        _input(bsdf, "Transmission Weight", "Transmission").default_value = 1.0
        bsdf.inputs["Roughness"].default_value = 0.02
    elif override == "mirror":
        bsdf.inputs["Metallic"].default_value = 1.0
        bsdf.inputs["Roughness"].default_value = 0.02
    elif override == "procedural":
        noise = nodes.new("ShaderNodeTexNoise")
        noise.inputs["Scale"].default_value = 12.0
        ramp = nodes.new("ShaderNodeValToRGB")
        ramp.color_ramp.elements[0].color = (base_color[0] * 0.8, base_color[1] * 0.8, base_color[2] * 0.8, 1.0)
        ramp.color_ramp.elements[1].color = (base_color[0], base_color[1], base_color[2], 1.0)
        links.new(noise.outputs["Fac"], ramp.inputs["Fac"])
        links.new(ramp.outputs["Color"], bsdf.inputs["Base Color"])
    mat["material_type"] = material_type
    if image is not None:
        _image_node(mat, image, uv)
    for obj in _targets(target):
        obj.data.materials.clear()
        obj.data.materials.append(mat)


def bind_texture(target, image, uv_mode, uv_scale, uv_rotation, fallback=False):
    uv = {"mode": uv_mode, "scale": uv_scale, "rotation": uv_rotation}
    for obj in _targets(target):
        if not obj.data.materials:
            obj.data.materials.append(bpy.data.materials.new(obj.name.replace("/", "_")))
            obj.data.materials[0].use_nodes = True
        for mat in obj.data.materials:
            _image_node(mat, image, uv)


def add_light(lid, kind, position, direction, intensity, color, size):
    data = bpy.data.lights.new(lid, type=kind.upper())
    data.energy = intensity
    data.color = color
    if kind == "area":
        data.size = size
    obj = _link(bpy.data.objects.new(lid, data))
    obj.location = position
    obj.rotation_euler = Vector(direction).to_track_quat("-Z", "Y").to_euler()


def setup_camera(cid, kind, position, yaw, scale_or_fov):
    cam = bpy.data.cameras.new(cid)
    if kind == "topdown_ortho":
        cam.type = "ORTHO"
        cam.ortho_scale = scale_or_fov
        rotation = (0.0, 0.0, yaw)
    else:
        cam.angle = math.radians(scale_or_fov)
        rotation = (math.radians(60.0), 0.0, yaw)
    cam.clip_end = 1000.0
    obj = _link(bpy.data.objects.new(cid, cam))
    obj.location = position
    obj.rotation_euler = rotation
    bpy.context.scene.camera = obj


def render_settings(resolution_x, resolution_y, samples, world_strength):
    scene = bpy.context.scene
    scene.render.resolution_x = resolution_x
    scene.render.resolution_y = resolution_y
    scene.render.engine = "CYCLES"
    scene.cycles.samples = samples
    world = bpy.data.worlds.new("world")
    world.use_nodes = True
    world.node_tree.nodes["Background"].inputs["Strength"].default_value = world_strength
    scene.world = world


def embedded_image(name, data):
    import base64
    path = os.path.join(tempfile.gettempdir(), name)
    with open(path, "wb") as out:
        out.write(base64.b64decode(data))
    return path


def render_to(path):
    scene = bpy.context.scene
    scene.render.filepath = path
    bpy.ops.render.render(write_still=True)


def run(main):
    args = sys.argv[sys.argv.index("--") + 1:] if "--" in sys.argv else []
    try:
        main(args)
    except Exception:
        traceback.print_exc(file=sys.stderr)
        return 1
    return 0
)PY";

}  // namespace detail

/// Deterministic Blender script for `program`. Object names equal IR ids;
/// every statement becomes one constructor call wrapped in `stmt(<id>)`.
inline std::string emit_blender_script(const SceneProgram& program, const EmitOptions& opts = {}) {
    using namespace detail;
    validate(program);

    std::vector<std::string> missing;
    for (const auto& s : program.statements)
        if (const auto* a = std::get_if<AssetInstance>(&s)) {
            std::error_code ec;
            if (!std::filesystem::is_regular_file(opts.asset_root / a->mesh_ref, ec)) missing.push_back(a->mesh_ref);
        }
    if (!missing.empty()) {
        std::string msg = "unresolved asset meshes:";
        for (const auto& m : missing) msg += " " + m;
        throw EmitError(msg);
    }

    std::vector<std::pair<std::string, std::string>> embedded;  // var name, base64
    auto image_expr = [&](const std::string& ref) -> std::string {
        if (ref.rfind("builtin:", 0) == 0) return py(ref);
        const auto file = opts.texture_root / ref;
        if (opts.embed_textures) {
            std::string bytes;
            try {
                bytes = read_text(file);
            } catch (const LoadError&) {
                throw EmitError("unresolved texture " + ref);
            }
            const std::string name = "texture_" + hex64(fnv1a(ref)) + std::filesystem::path(ref).extension().string();
            embedded.push_back({name, base64(bytes)});
            return "embedded_image(" + py(name) + ", _EMBEDDED[" + py(name) + "])";
        }
        return "resolve(" + py(rel_path(file, opts.script_dir)) + ")";
    };
    auto uv_expr = [&](const UvMapping& uv) {
        return "{\"mode\": " + py(uv.mode) + ", \"scale\": " + py(uv.scale) + ", \"rotation\": " + py(uv.rotation) + "}";
    };
    auto parent_arg = [&](const std::optional<ObjectId>& parent) {
        return parent ? ", parent=" + py(*parent) : std::string();
    };

    std::ostringstream body;
    const RoomShell& shell = program.shell;
    body << "    reset_scene()\n";
    body << "    build_shell(" << py(shell.width) << ", " << py(shell.depth) << ", " << py(shell.wall_height) << ", [";
    for (std::size_t i = 0; i < shell.walls.size(); ++i)
        body << (i ? ", " : "") << "(" << py(shell.walls[i].id) << ", " << py(shell.walls[i].a) << ", "
             << py(shell.walls[i].b) << ")";
    body << "], [";
    for (std::size_t i = 0; i < shell.cutouts.size(); ++i) {
        const auto& c = shell.cutouts[i];
        body << (i ? ", " : "") << "{\"id\": " << py(c.id) << ", \"kind\": " << py(to_string(c.kind))
             << ", \"wall\": " << py(c.wall) << ", \"offset\": " << py(c.offset) << ", \"width\": " << py(c.width)
             << ", \"height\": " << py(c.height) << ", \"sill\": " << py(c.sill) << "}";
    }
    body << "])\n";

    bool has_camera = false;
    bool has_settings = false;
    for (const auto& s : program.statements) {
        std::string sid;
        std::string call;
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Proxy>) {
                    sid = v.id;
                    call = "build_object(" + py(v.id) + ", " + py(v.category) + ", " + py(v.pose.position) + ", " +
                           py(v.pose.yaw) + ", " + py(v.size) + parent_arg(v.parent) + ")";
                } else if constexpr (std::is_same_v<T, Assembly>) {
                    sid = v.id;
                    std::string parts;
                    for (std::size_t i = 0; i < v.parts.size(); ++i) {
                        const Part& p = v.parts[i];
                        parts += (i ? ",\n            " : "\n            ");
                        parts += "(" + py(p.name) + ", " + py(to_string(p.primitive)) + ", " + py(p.size) + ", " +
                                 py(p.offset) + ", " + py(p.rotation) + ")";
                    }
                    call = "build_assembly(" + py(v.id) + ", " + py(v.category) + ", " + py(v.pose.position) + ", " +
                           py(v.pose.yaw) + ", [" + parts + "]" + parent_arg(v.parent) + ")";
                } else if constexpr (std::is_same_v<T, AssetInstance>) {
                    sid = v.id;
                    call = "build_asset(" + py(v.id) + ", " + py(v.category) + ", resolve(" +
                           py(rel_path(opts.asset_root / v.mesh_ref, opts.script_dir)) + "), " + py(v.pose.position) +
                           ", " + py(v.pose.yaw) + ", " + py(v.canonical_size) + ", " + py(v.scale) +
                           parent_arg(v.parent) + ")";
                } else if constexpr (std::is_same_v<T, MaterialAssign>) {
                    sid = "material:" + v.target;
                    call = "bind_material(" + py(v.target) + ", " + py(v.spec.material_type) + ", " +
                           py(v.spec.base_color) + ", " + py(v.spec.roughness) + ", " + py(v.spec.metallic) + ", " +
                           py(v.spec.specular) + ", override=" + py(to_string(v.shader_override));
                    if (v.image) call += ", image=" + image_expr(v.image->image_ref) + ", uv=" + uv_expr(v.image->uv);
                    call += ")";
                } else if constexpr (std::is_same_v<T, TextureBind>) {
                    sid = "texture:" + v.target;
                    call = "bind_texture(" + py(v.target) + ", " + image_expr(v.image_ref) + ", " + py(v.uv.mode) +
                           ", " + py(v.uv.scale) + ", " + py(v.uv.rotation) + ", fallback=" + py(v.fallback) + ")";
                } else if constexpr (std::is_same_v<T, Light>) {
                    sid = v.id;
                    call = "add_light(" + py(v.id) + ", " + py(to_string(v.kind)) + ", " + py(v.position) + ", " +
                           py(v.direction) + ", " + py(v.intensity) + ", " + py(v.color) + ", " + py(v.size) + ")";
                } else if constexpr (std::is_same_v<T, Camera>) {
                    has_camera = true;
                    sid = v.id;
                    call = "setup_camera(" + py(v.id) + ", " +
                           py(v.kind == CameraKind::topdown_ortho ? "topdown_ortho" : "perspective") + ", " +
                           py(v.pose.position) + ", " + py(v.pose.yaw) + ", " + py(v.scale_or_fov) + ")";
                } else if constexpr (std::is_same_v<T, RenderSettings>) {
                    has_settings = true;
                    sid = "render_settings";
                    call = "render_settings(" + py(v.resolution_x) + ", " + py(v.resolution_y) + ", " +
                           py(v.samples) + ", " + py(v.world_strength) + ")";
                } else {
                    static_assert(sizeof(T) == 0, "statement kind without an emission rule");
                }
            },
            s);
        body << "    with stmt(" << py(sid) << "):\n        " << call << "\n";
    }
    if (!has_camera) {
        const RenderSettings defaults;
        const Camera c = topdown_camera(shell, defaults.resolution_x, defaults.resolution_y);
        body << "    with stmt(\"camera\"):\n        setup_camera(" << py(c.id) << ", \"topdown_ortho\", "
             << py(c.pose.position) << ", " << py(c.pose.yaw) << ", " << py(c.scale_or_fov) << ")\n";
    }
    if (!has_settings) {
        const RenderSettings r;
        body << "    with stmt(\"render_settings\"):\n        render_settings(" << py(r.resolution_x) << ", "
             << py(r.resolution_y) << ", " << py(r.samples) << ", " << py(r.world_strength) << ")\n";
    }
    body << "    if args:\n        render_to(args[0])\n";

    std::ostringstream out;
    out << "# Scene script for " << kIrVersion << " program " << program_hash(program) << ".\n";
    out << "# Usage: blender --background --python <this file> -- <render.png>\n";
    if (opts.mode == ShimMode::self_contained) {
        out << kPrelude;
    } else {
        out << "import os\nimport sys\n\nfrom car_runtime import *  # noqa: F401,F403\n";
    }
    out << "\n\ndef resolve(path):\n    return os.path.join(os.path.dirname(os.path.abspath(__file__)), path)\n";
    if (!embedded.empty()) {
        out << "\n\n_EMBEDDED = {\n";
        std::set<std::string> seen;
        for (const auto& [name, data] : embedded)
            if (seen.insert(name).second) out << "    " << py(name) << ": " << py(data) << ",\n";
        out << "}\n";
    }
    out << "\n\ndef main(args):\n" << body.str();
    out << "\n\nif __name__ == \"__main__\":\n    sys.exit(run(main))\n";
    return out.str();
}

}  // namespace car
