#pragma once

// Floor-plane geometry: oriented footprints, exact rectangle overlap by convex
// clipping, room containment, support-surface discovery and occupancy grids.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "car/program.hpp"

namespace car {

inline constexpr double kDegenerateHalfExtent = 1e-3;
inline constexpr double kContainEps = 1e-9;

/// Oriented rectangle in the floor plane.
struct Footprint {
    Vec2 center;
    Vec2 half_extent;
    double yaw = 0.0;

    bool degenerate() const noexcept {
        return half_extent.x < kDegenerateHalfExtent || half_extent.y < kDegenerateHalfExtent;
    }
    double area() const noexcept { return degenerate() ? 0.0 : 4.0 * half_extent.x * half_extent.y; }

    /// Corners counter-clockwise.
    std::array<Vec2, 4> corners() const noexcept {
        const Vec2 ux = rotate({half_extent.x, 0.0}, yaw);
        const Vec2 uy = rotate({0.0, half_extent.y}, yaw);
        return {center - ux - uy, center + ux - uy, center + ux + uy, center - ux + uy};
    }

    /// Half extents of the world-axis-aligned bounding box.
    Vec2 aabb_half() const noexcept {
        const double c = std::abs(std::cos(yaw));
        const double s = std::abs(std::sin(yaw));
        return {c * half_extent.x + s * half_extent.y, s * half_extent.x + c * half_extent.y};
    }

    double bounding_radius() const noexcept { return norm(half_extent); }

    bool contains_point(Vec2 p, double eps = kContainEps) const noexcept {
        const Vec2 local = rotate(p - center, -yaw);
        return std::abs(local.x) <= half_extent.x + eps && std::abs(local.y) <= half_extent.y + eps;
    }
};

inline Footprint room_rect(const RoomShell& shell) {
    return {{shell.width / 2.0, shell.depth / 2.0}, {shell.width / 2.0, shell.depth / 2.0}, 0.0};
}

// ---------------------------------------------------------------------------
// Polygon clipping

using Polygon = std::vector<Vec2>;

inline double polygon_area(std::span<const Vec2> poly) noexcept {
    if (poly.size() < 3) return 0.0;
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) a += cross(poly[i], poly[(i + 1) % poly.size()]);
    return 0.5 * a;
}

/// Sutherland-Hodgman clip of `subject` against a convex counter-clockwise
/// `clip` polygon.
inline Polygon clip_convex(Polygon subject, std::span<const Vec2> clip) {
    for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Vec2 a = clip[e];
        const Vec2 b = clip[(e + 1) % clip.size()];
        const Vec2 ab = b - a;
        Polygon out;
        out.reserve(subject.size() + 2);
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const Vec2 p = subject[i];
            const Vec2 q = subject[(i + 1) % subject.size()];
            const double dp = cross(ab, p - a);
            const double dq = cross(ab, q - a);
            if (dp >= 0.0) out.push_back(p);
            if ((dp >= 0.0) != (dq >= 0.0)) {
                const double t = dp / (dp - dq);
                out.push_back(p + (q - p) * t);
            }
        }
        subject = std::move(out);
    }
    return subject;
}

/// Exact area of intersection of two oriented rectangles. Touching edges and
/// degenerate rectangles give zero.
inline double overlap_area(const Footprint& a, const Footprint& b) {
    if (a.degenerate() || b.degenerate()) return 0.0;
    auto key = [](const Footprint& f) { return std::tie(f.center.x, f.center.y, f.half_extent.x, f.half_extent.y, f.yaw); };
    if (key(a) == key(b)) return a.area();
    // Clip in a canonical order so the result is bitwise symmetric.
    if (key(b) < key(a)) return overlap_area(b, a);
    const double reach = a.bounding_radius() + b.bounding_radius();
    const Vec2 d = a.center - b.center;
    if (dot(d, d) >= reach * reach) return 0.0;
    const auto ca = a.corners();
    const auto cb = b.corners();
    const Polygon clipped = clip_convex(Polygon(ca.begin(), ca.end()), cb);
    const double area = polygon_area(clipped);
    return std::clamp(area, 0.0, std::min(a.area(), b.area()));
}

/// True iff every corner of `f` lies in the closed rectangle `outer`.
inline bool contained_in(const Footprint& f, const Footprint& outer) {
    if (f.degenerate()) return outer.contains_point(f.center);
    for (const Vec2& c : f.corners())
        if (!outer.contains_point(c)) return false;
    return true;
}

inline bool contained_in_room(const Footprint& f, const RoomShell& shell) {
    return contained_in(f, room_rect(shell));
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) noexcept {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    return norm(p - (a + ab * t));
}

/// Shortest distance between two rectangles; zero when they touch or overlap.
inline double gap_distance(const Footprint& a, const Footprint& b) {
    if (overlap_area(a, b) > 0.0) return 0.0;
    const auto ca = a.corners();
    const auto cb = b.corners();
    if (!a.degenerate() && b.contains_point(ca[0], 0.0)) return 0.0;
    if (!b.degenerate() && a.contains_point(cb[0], 0.0)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 4; ++k) {
            best = std::min(best, point_segment_distance(ca[i], cb[k], cb[(k + 1) % 4]));
            best = std::min(best, point_segment_distance(cb[i], ca[k], ca[(k + 1) % 4]));
        }
    return best;
}

inline bool point_in_polygon(Vec2 p, std::span<const Vec2> poly) noexcept {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2 a = poly[i];
        const Vec2 b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

// ---------------------------------------------------------------------------
// 3D helpers for parts

struct Mat3 {
    std::array<double, 9> m{};  // row-major
    Vec3 operator*(Vec3 v) const noexcept {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Vec3 column(int c) const noexcept { return {m[c], m[3 + c], m[6 + c]}; }
};

/// Blender's XYZ euler order: R = Rz * Ry * Rx.
inline Mat3 euler_xyz(Vec3 e) noexcept {
    const double cx = std::cos(e.x), sx = std::sin(e.x);
    const double cy = std::cos(e.y), sy = std::sin(e.y);
    const double cz = std::cos(e.z), sz = std::sin(e.z);
    return {{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,  //
             sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,  //
             -sy, cy * sx, cy * cx}};
}

/// Corners of a part's local bounding box in the owning object's frame.
inline std::array<Vec3, 8> part_corners(const Part& p) {
    const Mat3 r = euler_xyz(p.rotation);
    std::array<Vec3, 8> out{};
    std::size_t k = 0;
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (int sz : {-1, 1})
                out[k++] = p.offset + r * Vec3{sx * p.size.x / 2.0, sy * p.size.y / 2.0, sz * p.size.z / 2.0};
    return out;
}

struct Aabb {
    Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::infinity()};
    Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};

    void extend(Vec3 p) noexcept {
        min = {std::min(min.x, p.x), std::min(min.y, p.y), std::min(min.z, p.z)};
        max = {std::max(max.x, p.x), std::max(max.y, p.y), std::max(max.z, p.z)};
    }
    bool contains(const Aabb& o, double eps = 1e-9) const noexcept {
        return o.min.x >= min.x - eps && o.min.y >= min.y - eps && o.min.z >= min.z - eps &&
               o.max.x <= max.x + eps && o.max.y <= max.y + eps && o.max.z <= max.z + eps;
    }
    Vec3 center() const noexcept { return (min + max) * 0.5; }
    /// Same center, each half-extent multiplied by `f`.
    Aabb scaled(double f) const noexcept {
        const Vec3 c = center();
        const Vec3 h = (max - min) * (0.5 * f);
        return {c - h, c + h};
    }
};

/// Local-frame bounding box of an object (origin at footprint center, bottom).
inline Aabb local_bounds(const Statement& s) {
    Aabb box;
    if (const auto* a = std::get_if<Assembly>(&s)) {
        for (const auto& part : a->parts)
            for (const Vec3& c : part_corners(part)) box.extend(c);
        return box;
    }
    const Vec3 size = std::holds_alternative<Proxy>(s) ? std::get<Proxy>(s).size : std::get<AssetInstance>(s).size();
    box.extend({-size.x / 2.0, -size.y / 2.0, 0.0});
    box.extend({size.x / 2.0, size.y / 2.0, size.z});
    return box;
}

inline Aabb world_aabb(const Statement& s) {
    const Pose& pose = object_pose(s);
    const Aabb local = local_bounds(s);
    Aabb out;
    for (double x : {local.min.x, local.max.x})
        for (double y : {local.min.y, local.max.y})
            for (double z : {local.min.z, local.max.z}) {
                const Vec2 r = rotate({x, y}, pose.yaw);
                out.extend({pose.position.x + r.x, pose.position.y + r.y, pose.position.z + z});
            }
    return out;
}

/// World z-range [bottom, top] of an object.
inline std::pair<double, double> vertical_extent(const Statement& s) {
    const Aabb local = local_bounds(s);
    const double z = object_pose(s).position.z;
    return {z + local.min.z, z + local.max.z};
}

/// Floor-plane footprint of an object statement. Assemblies use the tightest
/// rectangle at the object's yaw that covers every part.
inline Footprint footprint_of(const Statement& s) {
    const Pose& pose = object_pose(s);
    const Aabb local = local_bounds(s);
    const Vec2 local_center{(local.min.x + local.max.x) / 2.0, (local.min.y + local.max.y) / 2.0};
    return {pose.position.xy() + rotate(local_center, pose.yaw),
            {(local.max.x - local.min.x) / 2.0, (local.max.y - local.min.y) / 2.0},
            pose.yaw};
}

/// Footprint of a single part in world coordinates.
inline Footprint part_footprint(const Pose& pose, const Part& part) {
    Aabb local;
    for (const Vec3& c : part_corners(part)) local.extend(c);
    const Vec2 lc{(local.min.x + local.max.x) / 2.0, (local.min.y + local.max.y) / 2.0};
    // Only yaw-rotated parts keep their own orientation exactly.
    const bool yaw_only = std::abs(std::sin(part.rotation.x)) < 1e-12 && std::abs(std::sin(part.rotation.y)) < 1e-12 &&
                          std::cos(part.rotation.x) > 0.0 && std::cos(part.rotation.y) > 0.0;
    if (yaw_only)
        return {pose.position.xy() + rotate(part.offset.xy(), pose.yaw), {part.size.x / 2.0, part.size.y / 2.0},
                normalize_yaw(pose.yaw + part.rotation.z)};
    return {pose.position.xy() + rotate(lc, pose.yaw), {(local.max.x - local.min.x) / 2.0, (local.max.y - local.min.y) / 2.0},
            pose.yaw};
}

// ---------------------------------------------------------------------------
// Support surfaces

struct SurfaceConfig {
    double cell = 0.02;
    double min_area = 0.0025;
    double occlusion_fraction = 0.9;
};

struct SupportSurface {
    ObjectId owner;
    std::string part;
    double height = 0.0;
    Footprint rect;
    double cell = 0.02;
    int nx = 0;
    int ny = 0;
    std::vector<char> free_cells;  // row-major, 1 = free

    bool is_free(int i, int j) const { return free_cells[static_cast<std::size_t>(j * nx + i)] != 0; }

    Vec2 cell_center_local(int i, int j) const noexcept {
        return {-rect.half_extent.x + (i + 0.5) * cell, -rect.half_extent.y + (j + 0.5) * cell};
    }

    Footprint cell_footprint(int i, int j) const noexcept {
        return {rect.center + rotate(cell_center_local(i, j), rect.yaw), {cell / 2.0, cell / 2.0}, rect.yaw};
    }

    std::size_t free_count() const {
        return static_cast<std::size_t>(std::count(free_cells.begin(), free_cells.end(), char{1}));
    }
};

inline SupportSurface make_surface(ObjectId owner, std::string part, double height, Footprint rect, double cell) {
    SupportSurface s;
    s.owner = std::move(owner);
    s.part = std::move(part);
    s.height = height;
    s.rect = rect;
    s.cell = cell;
    s.nx = static_cast<int>(std::floor(2.0 * rect.half_extent.x / cell + 1e-9));
    s.ny = static_cast<int>(std::floor(2.0 * rect.half_extent.y / cell + 1e-9));
    s.free_cells.assign(static_cast<std::size_t>(std::max(0, s.nx * s.ny)), 1);
    return s;
}

namespace detail {

struct UpFace {
    std::string part;
    double height;
    Footprint rect;
    double area;
};

inline constexpr double kUpTolerance = 1e-9;

/// Upward-facing horizontal faces of one part, in world coordinates.
inline std::vector<UpFace> up_faces(const Pose& pose, const Part& part) {
    std::vector<UpFace> faces;
    const Mat3 r = euler_xyz(part.rotation);
    const std::array<double, 3> size{part.size.x, part.size.y, part.size.z};
    auto emit = [&](Vec3 local_center, Vec3 axis_u, double half_u, double half_v, double area) {
        const Vec2 c = pose.position.xy() + rotate(local_center.xy(), pose.yaw);
        const double yaw = normalize_yaw(pose.yaw + std::atan2(axis_u.y, axis_u.x));
        faces.push_back({part.name, pose.position.z + local_center.z, {c, {half_u, half_v}, yaw}, area});
    };
    switch (part.primitive) {
        case Primitive::box:
            for (int k = 0; k < 3; ++k) {
                for (double sign : {1.0, -1.0}) {
                    const Vec3 n = r.column(k) * sign;
                    if (n.z < 1.0 - kUpTolerance) continue;
                    const int u = (k + 1) % 3;
                    const int v = (k + 2) % 3;
                    emit(part.offset + n * (size[static_cast<std::size_t>(k)] / 2.0), r.column(u),
                         size[static_cast<std::size_t>(u)] / 2.0, size[static_cast<std::size_t>(v)] / 2.0,
                         size[static_cast<std::size_t>(u)] * size[static_cast<std::size_t>(v)]);
                }
            }
            break;
        case Primitive::cylinder:
            for (double sign : {1.0, -1.0}) {
                const Vec3 n = r.column(2) * sign;
                if (n.z < 1.0 - kUpTolerance) continue;
                const double a = part.size.x / 2.0;
                const double b = part.size.y / 2.0;
                // Inscribed rectangle of the elliptic cap.
                emit(part.offset + n * (part.size.z / 2.0), r.column(0), a / std::sqrt(2.0), b / std::sqrt(2.0),
                     std::numbers::pi * a * b);
            }
            break;
        case Primitive::plane: {
            const Vec3 n = r.column(2);
            if (n.z >= 1.0 - kUpTolerance)
                emit(part.offset, r.column(0), part.size.x / 2.0, part.size.y / 2.0, part.size.x * part.size.y);
            break;
        }
        case Primitive::sphere:
        case Primitive::cone:
        case Primitive::torus:
            break;
    }
    return faces;
}

}  // namespace detail

/// Upward-facing horizontal part faces that can carry objects. A face is
/// dropped when smaller than `min_area` or when another part rising above it
/// covers at least `occlusion_fraction` of it. Sorted by height, highest first.
inline std::vector<SupportSurface> discover_surfaces(const Assembly& assembly, const SurfaceConfig& cfg = {}) {
    std::vector<detail::UpFace> faces;
    for (const auto& part : assembly.parts)
        for (auto& f : detail::up_faces(assembly.pose, part)) faces.push_back(std::move(f));

    std::vector<SupportSurface> out;
    for (const auto& face : faces) {
        if (face.area < cfg.min_area) continue;
        bool occluded = false;
        const double rect_area = face.rect.area();
        for (const auto& other : assembly.parts) {
            if (other.name == face.part) continue;
            double top = -std::numeric_limits<double>::infinity();
            for (const Vec3& c : part_corners(other)) top = std::max(top, assembly.pose.position.z + c.z);
            if (!(top > face.height + 1e-9)) continue;
            const double covered = overlap_area(face.rect, part_footprint(assembly.pose, other));
            if (rect_area > 0.0 && covered >= cfg.occlusion_fraction * rect_area) {
                occluded = true;
                break;
            }
        }
        if (occluded) continue;
        out.push_back(make_surface(assembly.id, face.part, face.height, face.rect, cfg.cell));
    }
    std::stable_sort(out.begin(), out.end(), [](const SupportSurface& a, const SupportSurface& b) {
        if (a.height != b.height) return a.height > b.height;
        return a.part < b.part;
    });
    return out;
}

/// Support surfaces of any object statement. A proxy or asset instance
/// offers its bounding-box top.
inline std::vector<SupportSurface> support_surfaces_of(const Statement& s, const SurfaceConfig& cfg = {}) {
    if (const auto* a = std::get_if<Assembly>(&s)) return discover_surfaces(*a, cfg);
    const Footprint f = footprint_of(s);
    if (f.area() < cfg.min_area) return {};
    return {make_surface(*object_id(s), "top", vertical_extent(s).second, f, cfg.cell)};
}

/// Marks every cell that intersects `f` as occupied.
inline SupportSurface occupy(SupportSurface surface, const Footprint& f) {
    const double reach = f.bounding_radius() + surface.cell;
    for (int j = 0; j < surface.ny; ++j)
        for (int i = 0; i < surface.nx; ++i) {
            const Footprint cf = surface.cell_footprint(i, j);
            if (norm(cf.center - f.center) > reach) continue;
            const bool hit = f.degenerate() ? cf.contains_point(f.center) : overlap_area(cf, f) > 1e-12;
            if (hit) surface.free_cells[static_cast<std::size_t>(j * surface.nx + i)] = 0;
        }
    return surface;
}

struct SlotPlacement {
    Vec3 position;
    double yaw = 0.0;
};

/// First block of free cells large enough for `extent` (in the surface's own
/// axes), scanning windows by distance from the surface center, then row,
/// then column.
inline std::optional<SlotPlacement> find_free_slot(const SupportSurface& surface, Vec2 extent) {
    if (!(extent.x > 0.0) || !(extent.y > 0.0)) return std::nullopt;
    const int kx = static_cast<int>(std::ceil(extent.x / surface.cell - 1e-9));
    const int ky = static_cast<int>(std::ceil(extent.y / surface.cell - 1e-9));
    if (kx > surface.nx || ky > surface.ny) return std::nullopt;

    struct Window {
        double dist2;
        int j0;
        int i0;
        Vec2 center;
    };
    std::vector<Window> windows;
    windows.reserve(static_cast<std::size_t>((surface.nx - kx + 1) * (surface.ny - ky + 1)));
    for (int j0 = 0; j0 + ky <= surface.ny; ++j0)
        for (int i0 = 0; i0 + kx <= surface.nx; ++i0) {
            const Vec2 c{-surface.rect.half_extent.x + (i0 + kx / 2.0) * surface.cell,
                         -surface.rect.half_extent.y + (j0 + ky / 2.0) * surface.cell};
            windows.push_back({dot(c, c), j0, i0, c});
        }
    std::sort(windows.begin(), windows.end(), [](const Window& a, const Window& b) {
        if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
        if (a.j0 != b.j0) return a.j0 < b.j0;
        return a.i0 < b.i0;
    });
    for (const auto& w : windows) {
        bool ok = true;
        for (int j = w.j0; j < w.j0 + ky && ok; ++j)
            for (int i = w.i0; i < w.i0 + kx; ++i)
                if (!surface.is_free(i, j)) {
                    ok = false;
                    break;
                }
        if (!ok) continue;
        const Vec2 world = surface.rect.center + rotate(w.center, surface.rect.yaw);
        return SlotPlacement{{world.x, world.y, surface.height}, surface.rect.yaw};
    }
    return std::nullopt;
}

}  // namespace car
