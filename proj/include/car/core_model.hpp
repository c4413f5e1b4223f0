#pragma once

// Structured scene state from image analysis and graph construction: the
// scene description, the deterministic skeleton derived from it, the
// completed scene graph, and the sidecar of deferred minor objects.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "car/common.hpp"
#include "car/program.hpp"

namespace car {

// ---------------------------------------------------------------------------
// Scene description

enum class ArchKind { wall, door, window, opening, built_in };

inline std::string to_string(ArchKind k) {
    switch (k) {
        case ArchKind::wall: return "wall";
        case ArchKind::door: return "door";
        case ArchKind::window: return "window";
        case ArchKind::opening: return "opening";
        case ArchKind::built_in: return "built-in";
    }
    return "wall";
}

inline std::optional<ArchKind> arch_kind_from_string(std::string_view s) {
    if (s == "wall") return ArchKind::wall;
    if (s == "door") return ArchKind::door;
    if (s == "window") return ArchKind::window;
    if (s == "opening") return ArchKind::opening;
    if (s == "built-in") return ArchKind::built_in;
    return std::nullopt;
}

/// Fixed architectural reference. Geometry is a 2D segment (a -> b) in room
/// coordinates; rectangular built-ins use the segment as a diagonal.
struct ArchElement {
    std::string id;
    ArchKind kind = ArchKind::wall;
    Vec2 a;
    Vec2 b;
    json metadata = json::object();
};

struct FunctionalZone {
    std::string label;
    std::vector<Vec2> polygon;  // image-normalized [0,1]^2
};

/// Anchor request recorded by image analysis: the object stands against a
/// wall or in a corner next to `target` (an arch id).
struct Anchor {
    std::string relation;  // against_wall | in_corner
    std::string target;
};

struct DescribedObject {
    ObjectId id;
    std::string category;
    PlacementType placement_type = PlacementType::floor;
    std::optional<ObjectId> parent;
    std::optional<Vec3> size_hint;
    std::optional<std::string> zone;
    // Decorative or small items (rugs, plants) that do not define the layout.
    bool minor = false;
    std::vector<Anchor> anchors;
};

struct SceneDescription {
    std::vector<DescribedObject> objects;
    std::vector<FunctionalZone> zones;
    std::vector<ArchElement> architecture;
    int image_width = 0;
    int image_height = 0;
    Vec2 room_extent{4.0, 4.0};

    const DescribedObject* find(std::string_view id) const {
        for (const auto& o : objects)
            if (o.id == id) return &o;
        return nullptr;
    }
    const ArchElement* find_arch(std::string_view id) const {
        for (const auto& a : architecture)
            if (a.id == id) return &a;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// Scene graph

enum class Relation {
    parent_of,
    child_of,
    left_of,
    right_of,
    front_of,
    behind,
    adjacent_to,
    on_top_of,
    under,
    faces,
    against_wall,
    in_corner
};

inline constexpr std::array<std::string_view, 12> kRelationNames = {
    "parent_of", "child_of", "left_of",  "right_of", "front_of",     "behind",
    "adjacent_to", "on_top_of", "under", "faces",    "against_wall", "in_corner"};

inline std::string to_string(Relation r) { return std::string(kRelationNames[static_cast<std::size_t>(r)]); }

inline std::optional<Relation> relation_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kRelationNames.size(); ++i)
        if (kRelationNames[i] == s) return static_cast<Relation>(i);
    return std::nullopt;
}

/// Fixed inverse table; faces/against_wall/in_corner have none.
inline std::optional<Relation> inverse(Relation r) {
    switch (r) {
        case Relation::parent_of: return Relation::child_of;
        case Relation::child_of: return Relation::parent_of;
        case Relation::left_of: return Relation::right_of;
        case Relation::right_of: return Relation::left_of;
        case Relation::front_of: return Relation::behind;
        case Relation::behind: return Relation::front_of;
        case Relation::on_top_of: return Relation::under;
        case Relation::under: return Relation::on_top_of;
        case Relation::adjacent_to: return Relation::adjacent_to;
        case Relation::faces:
        case Relation::against_wall:
        case Relation::in_corner: return std::nullopt;
    }
    return std::nullopt;
}

enum class Provenance { parent, vlm, wall, corner, inverse };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::parent: return "parent";
        case Provenance::vlm: return "vlm";
        case Provenance::wall: return "wall";
        case Provenance::corner: return "corner";
        case Provenance::inverse: return "inverse";
    }
    return "vlm";
}

inline std::optional<Provenance> provenance_from_string(std::string_view s) {
    if (s == "parent") return Provenance::parent;
    if (s == "vlm") return Provenance::vlm;
    if (s == "wall") return Provenance::wall;
    if (s == "corner") return Provenance::corner;
    if (s == "inverse") return Provenance::inverse;
    return std::nullopt;
}

struct GraphEdge {
    std::string src;
    std::string dst;
    Relation relation = Relation::adjacent_to;
    Provenance provenance = Provenance::vlm;

    auto triple() const { return std::tie(src, dst, relation); }
    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

enum class NodeKind { arch, major };

struct GraphNode {
    NodeKind kind = NodeKind::major;
    std::string category;
    json attributes = json::object();
    json geometry_hint = json::object();
};

struct SceneGraph {
    std::map<std::string, GraphNode> nodes;
    std::vector<GraphEdge> edges;

    bool has(std::string_view id) const { return nodes.count(std::string(id)) != 0; }
    bool is_arch(std::string_view id) const {
        auto it = nodes.find(std::string(id));
        return it != nodes.end() && it->second.kind == NodeKind::arch;
    }
};

struct MinorObject {
    ObjectId id;
    std::string category;
    ObjectId parent_surface;  // empty when not surface-bound
    double salience = 0.0;
    bool surface_bound = false;
    std::optional<Vec3> size_hint;
};

struct MinorSidecar {
    std::vector<MinorObject> entries;
};

struct Skeleton {
    std::set<std::string> v_arch;
    std::set<std::string> v_major;
    std::vector<GraphEdge> e_parent;
    MinorSidecar minor;
};

// ---------------------------------------------------------------------------
// Description invariants

/// Checks id uniqueness, parent existence, acyclicity and extents.
inline void validate(const SceneDescription& desc) {
    if (!(desc.room_extent.x > 0.0) || !(desc.room_extent.y > 0.0))
        throw StructuralError("room_extent must be strictly positive");
    std::set<std::string> ids;
    for (const auto& a : desc.architecture)
        if (!ids.insert(a.id).second) throw StructuralError("duplicate identifier '" + a.id + "'");
    for (const auto& o : desc.objects) {
        if (!ids.insert(o.id).second) throw StructuralError("duplicate identifier '" + o.id + "'");
        if (o.placement_type == PlacementType::surface && !o.parent)
            throw StructuralError("surface-placed object '" + o.id + "' has no parent");
    }
    for (const auto& o : desc.objects)
        if (o.parent && !desc.find(*o.parent))
            throw StructuralError("dangling parent '" + *o.parent + "' of object '" + o.id + "'");

    // Walk each parent chain; a revisit means a cycle.
    for (const auto& o : desc.objects) {
        std::vector<std::string> chain{o.id};
        const DescribedObject* cur = &o;
        while (cur->parent) {
            const std::string& next = *cur->parent;
            if (auto it = std::find(chain.begin(), chain.end(), next); it != chain.end()) {
                std::string cycle;
                for (auto c = it; c != chain.end(); ++c) cycle += *c + " -> ";
                throw StructuralError("cyclic parent chain: " + cycle + next);
            }
            chain.push_back(next);
            cur = desc.find(next);
        }
    }
}

// ---------------------------------------------------------------------------
// Operations

/// Deterministic skeleton. Floor/wall-placed, non-minor objects become major
/// nodes; everything else goes to the sidecar. Parent links between retained
/// nodes become parent_of edges.
inline Skeleton derive_skeleton(const SceneDescription& desc) {
    validate(desc);
    Skeleton sk;
    for (const auto& a : desc.architecture) sk.v_arch.insert(a.id);

    std::vector<const DescribedObject*> sorted;
    for (const auto& o : desc.objects) sorted.push_back(&o);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

    for (const auto* o : sorted) {
        const bool major = (o->placement_type == PlacementType::floor || o->placement_type == PlacementType::wall) &&
                           !o->minor;
        if (major) {
            sk.v_major.insert(o->id);
            continue;
        }
        MinorObject m;
        m.id = o->id;
        m.category = o->category;
        m.surface_bound = o->placement_type == PlacementType::surface;
        if (m.surface_bound) m.parent_surface = *o->parent;
        m.size_hint = o->size_hint;
        sk.minor.entries.push_back(std::move(m));
    }
    for (const auto* o : sorted) {
        if (!o->parent || !sk.v_major.count(o->id) || !sk.v_major.count(*o->parent)) continue;
        sk.e_parent.push_back({*o->parent, o->id, Relation::parent_of, Provenance::parent});
    }
    std::sort(sk.e_parent.begin(), sk.e_parent.end(),
              [](const GraphEdge& a, const GraphEdge& b) { return a.triple() < b.triple(); });
    return sk;
}

struct DroppedEdge {
    GraphEdge edge;
    std::string reason;
};

struct GraphCompletion {
    SceneGraph graph;
    std::vector<DroppedEdge> dropped;
};

/// Per-node attributes and geometry hints proposed alongside the edges.
struct NodeAnnotations {
    std::map<std::string, json> attributes;
    std::map<std::string, json> geometry_hints;
};

/// Builds the graph from the skeleton plus model-proposed forward edges.
/// Invalid proposals are dropped and reported; anchors and inverses are added.
inline GraphCompletion complete_graph(const Skeleton& skeleton, const std::vector<GraphEdge>& vlm_edges,
                                      const SceneDescription& desc, const NodeAnnotations& notes = {}) {
    GraphCompletion out;
    SceneGraph& g = out.graph;
    for (const auto& id : skeleton.v_arch) {
        GraphNode n;
        n.kind = NodeKind::arch;
        if (const auto* a = desc.find_arch(id)) n.category = to_string(a->kind);
        g.nodes.emplace(id, std::move(n));
    }
    for (const auto& id : skeleton.v_major) {
        GraphNode n;
        n.kind = NodeKind::major;
        if (const auto* o = desc.find(id)) n.category = o->category;
        g.nodes.emplace(id, std::move(n));
    }
    for (auto& [id, node] : g.nodes) {
        if (auto it = notes.attributes.find(id); it != notes.attributes.end()) node.attributes = it->second;
        if (auto it = notes.geometry_hints.find(id); it != notes.geometry_hints.end()) node.geometry_hint = it->second;
    }

    std::set<std::tuple<std::string, std::string, Relation>> seen;
    auto present = [&](const std::string& s, const std::string& d, Relation r) {
        if (seen.count({s, d, r})) return true;
        if (auto inv = inverse(r)) return seen.count({d, s, *inv}) != 0;
        return false;
    };

    for (const auto& e : skeleton.e_parent) {
        g.edges.push_back(e);
        seen.insert({e.src, e.dst, e.relation});
    }

    for (const auto& e : vlm_edges) {
        std::string reason;
        if (e.provenance != Provenance::vlm) reason = "provenance is not vlm";
        else if (!g.has(e.src)) reason = "unknown endpoint '" + e.src + "'";
        else if (!g.has(e.dst)) reason = "unknown endpoint '" + e.dst + "'";
        else if (e.src == e.dst) reason = "self-edge";
        else if (g.is_arch(e.src) && g.is_arch(e.dst)) reason = "relation between two architectural elements";
        else if (e.relation == Relation::parent_of || e.relation == Relation::child_of)
            reason = "hierarchy relations come from the description";
        else if (present(e.src, e.dst, e.relation)) reason = "duplicate";
        if (!reason.empty()) {
            out.dropped.push_back({e, reason});
            continue;
        }
        g.edges.push_back(e);
        seen.insert({e.src, e.dst, e.relation});
    }

    std::vector<std::string> majors(skeleton.v_major.begin(), skeleton.v_major.end());
    for (const auto& id : majors) {
        const auto* o = desc.find(id);
        if (!o) continue;
        for (const auto& anchor : o->anchors) {
            const auto rel = relation_from_string(anchor.relation);
            if (!rel || (*rel != Relation::against_wall && *rel != Relation::in_corner)) continue;
            if (!g.is_arch(anchor.target) || present(id, anchor.target, *rel)) continue;
            g.edges.push_back({id, anchor.target, *rel,
                               *rel == Relation::against_wall ? Provenance::wall : Provenance::corner});
            seen.insert({id, anchor.target, *rel});
        }
    }

    const std::size_t forward = g.edges.size();
    for (std::size_t i = 0; i < forward; ++i) {
        const GraphEdge e = g.edges[i];
        const auto inv = inverse(e.relation);
        if (!inv || seen.count({e.dst, e.src, *inv})) continue;
        g.edges.push_back({e.dst, e.src, *inv, Provenance::inverse});
        seen.insert({e.dst, e.src, *inv});
    }
    return out;
}

inline std::vector<DescribedObject> wall_subset(const SceneDescription& desc) {
    std::vector<DescribedObject> out;
    for (const auto& o : desc.objects)
        if (o.placement_type == PlacementType::wall) out.push_back(o);
    return out;
}

inline std::vector<MinorObject> select_salient_minors(const MinorSidecar& sidecar, double threshold = 0.5) {
    std::vector<MinorObject> out;
    for (const auto& m : sidecar.entries)
        if (!m.surface_bound && m.salience >= threshold) out.push_back(m);
    return out;
}

/// Checks the graph invariants; returns an empty string when they hold.
inline std::string check_graph(const SceneGraph& g) {
    std::set<std::tuple<std::string, std::string, Relation>> triples;
    for (const auto& e : g.edges) {
        if (!g.has(e.src) || !g.has(e.dst)) return "edge endpoint missing: " + e.src + " -> " + e.dst;
        if (e.src == e.dst) return "self-edge on " + e.src;
        if (!triples.insert({e.src, e.dst, e.relation}).second)
            return "duplicate edge " + e.src + " " + to_string(e.relation) + " " + e.dst;
    }
    for (const auto& e : g.edges) {
        if (e.provenance == Provenance::inverse) continue;
        const auto inv = inverse(e.relation);
        if (!inv) continue;
        const auto n = std::count_if(g.edges.begin(), g.edges.end(), [&](const GraphEdge& x) {
            return x.provenance == Provenance::inverse && x.src == e.dst && x.dst == e.src && x.relation == *inv;
        });
        if (n != 1) return "edge " + e.src + " " + to_string(e.relation) + " " + e.dst + " has " + std::to_string(n) + " inverses";
    }
    return {};
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const SceneDescription& d) {
    json objects = json::array();
    for (const auto& o : d.objects) {
        json j{{"id", o.id}, {"category", o.category}, {"placement_type", to_string(o.placement_type)}};
        if (o.parent) j["parent"] = *o.parent;
        if (o.size_hint) j["size_hint"] = to_json_vec(*o.size_hint);
        if (o.zone) j["zone"] = *o.zone;
        if (o.minor) j["minor"] = true;
        if (!o.anchors.empty()) {
            j["anchors"] = json::array();
            for (const auto& a : o.anchors) j["anchors"].push_back({{"relation", a.relation}, {"target", a.target}});
        }
        objects.push_back(std::move(j));
    }
    json zones = json::array();
    for (const auto& z : d.zones) {
        json poly = json::array();
        for (const auto& p : z.polygon) poly.push_back(to_json_vec(p));
        zones.push_back({{"label", z.label}, {"polygon", poly}});
    }
    json arch = json::array();
    for (const auto& a : d.architecture)
        arch.push_back({{"id", a.id}, {"kind", to_string(a.kind)}, {"a", to_json_vec(a.a)}, {"b", to_json_vec(a.b)},
                        {"metadata", a.metadata}});
    return {{"objects", objects},
            {"zones", zones},
            {"architecture", arch},
            {"image_size", json::array({d.image_width, d.image_height})},
            {"room_extent", to_json_vec(d.room_extent)}};
}

namespace detail {

inline Vec2 read_vec2(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ParseError(path + ": expected array of 2 numbers");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline Vec3 read_vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
        throw ParseError(path + ": expected array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline const json& field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(path + "/" + key + ": missing required field");
    return j.at(key);
}

inline std::string string_field(const json& j, const char* key, const std::string& path) {
    const json& v = field(j, key, path);
    if (!v.is_string()) throw ParseError(path + "/" + key + ": expected string");
    return v.get<std::string>();
}

}  // namespace detail

inline SceneDescription description_from_json(const json& j) {
    using namespace detail;
    SceneDescription d;
    const json& objects = field(j, "objects", "");
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const json& o = objects[i];
        const std::string path = "/objects/" + std::to_string(i);
        DescribedObject obj;
        obj.id = string_field(o, "id", path);
        obj.category = string_field(o, "category", path);
        auto pt = placement_from_string(string_field(o, "placement_type", path));
        if (!pt) throw ParseError(path + "/placement_type: unknown placement type");
        obj.placement_type = *pt;
        if (o.contains("parent") && !o["parent"].is_null()) obj.parent = string_field(o, "parent", path);
        if (o.contains("size_hint")) obj.size_hint = read_vec3(o["size_hint"], path + "/size_hint");
        if (o.contains("zone")) obj.zone = string_field(o, "zone", path);
        if (o.contains("minor")) obj.minor = o["minor"].get<bool>();
        if (o.contains("anchors"))
            for (const auto& a : o["anchors"])
                obj.anchors.push_back({string_field(a, "relation", path + "/anchors"),
                                       string_field(a, "target", path + "/anchors")});
        d.objects.push_back(std::move(obj));
    }
    if (j.contains("zones"))
        for (std::size_t i = 0; i < j["zones"].size(); ++i) {
            const json& z = j["zones"][i];
            const std::string path = "/zones/" + std::to_string(i);
            FunctionalZone zone;
            zone.label = string_field(z, "label", path);
            for (const auto& p : field(z, "polygon", path)) zone.polygon.push_back(read_vec2(p, path + "/polygon"));
            d.zones.push_back(std::move(zone));
        }
    if (j.contains("architecture"))
        for (std::size_t i = 0; i < j["architecture"].size(); ++i) {
            const json& a = j["architecture"][i];
            const std::string path = "/architecture/" + std::to_string(i);
            ArchElement e;
            e.id = string_field(a, "id", path);
            auto kind = arch_kind_from_string(string_field(a, "kind", path));
            if (!kind) throw ParseError(path + "/kind: unknown architectural kind");
            e.kind = *kind;
            e.a = read_vec2(field(a, "a", path), path + "/a");
            e.b = read_vec2(field(a, "b", path), path + "/b");
            if (a.contains("metadata")) e.metadata = a["metadata"];
            d.architecture.push_back(std::move(e));
        }
    if (j.contains("image_size")) {
        const Vec2 s = read_vec2(j["image_size"], "/image_size");
        d.image_width = static_cast<int>(s.x);
        d.image_height = static_cast<int>(s.y);
    }
    d.room_extent = read_vec2(field(j, "room_extent", ""), "/room_extent");
    validate(d);
    return d;
}

inline json to_json(const GraphEdge& e) {
    return {{"src", e.src}, {"dst", e.dst}, {"relation", to_string(e.relation)}, {"provenance", to_string(e.provenance)}};
}

inline GraphEdge edge_from_json(const json& j, const std::string& path) {
    using namespace detail;
    GraphEdge e;
    e.src = string_field(j, "src", path);
    e.dst = string_field(j, "dst", path);
    auto rel = relation_from_string(string_field(j, "relation", path));
    if (!rel) throw ParseError(path + "/relation: unknown relation");
    e.relation = *rel;
    if (j.contains("provenance")) {
        auto pv = provenance_from_string(string_field(j, "provenance", path));
        if (!pv) throw ParseError(path + "/provenance: unknown provenance");
        e.provenance = *pv;
    } else {
        e.provenance = Provenance::vlm;
    }
    return e;
}

inline json to_json(const SceneGraph& g) {
    json nodes = json::object();
    for (const auto& [id, n] : g.nodes)
        nodes[id] = {{"kind", n.kind == NodeKind::arch ? "arch" : "major"},
                     {"category", n.category},
                     {"attributes", n.attributes},
                     {"geometry_hint", n.geometry_hint}};
    json edges = json::array();
    for (const auto& e : g.edges) edges.push_back(to_json(e));
    return {{"nodes", nodes}, {"edges", edges}};
}

inline SceneGraph graph_from_json(const json& j) {
    using namespace detail;
    SceneGraph g;
    for (auto it = field(j, "nodes", "").begin(); it != j["nodes"].end(); ++it) {
        GraphNode n;
        const std::string path = "/nodes/" + it.key();
        const std::string kind = string_field(it.value(), "kind", path);
        if (kind != "arch" && kind != "major") throw ParseError(path + "/kind: expected arch or major");
        n.kind = kind == "arch" ? NodeKind::arch : NodeKind::major;
        n.category = string_field(it.value(), "category", path);
        n.attributes = it.value().value("attributes", json::object());
        n.geometry_hint = it.value().value("geometry_hint", json::object());
        g.nodes.emplace(it.key(), std::move(n));
    }
    const json& edges = field(j, "edges", "");
    for (std::size_t i = 0; i < edges.size(); ++i) g.edges.push_back(edge_from_json(edges[i], "/edges/" + std::to_string(i)));
    return g;
}

inline json to_json(const MinorSidecar& s) {
    json entries = json::array();
    for (const auto& m : s.entries) {
        json j{{"id", m.id},
               {"category", m.category},
               {"parent_surface", m.parent_surface},
               {"salience", m.salience},
               {"surface_bound", m.surface_bound}};
        if (m.size_hint) j["size_hint"] = to_json_vec(*m.size_hint);
        entries.push_back(std::move(j));
    }
    return {{"entries", entries}};
}

inline MinorSidecar sidecar_from_json(const json& j) {
    using namespace detail;
    MinorSidecar s;
    const json& entries = field(j, "entries", "");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const json& e = entries[i];
        const std::string path = "/entries/" + std::to_string(i);
        MinorObject m;
        m.id = string_field(e, "id", path);
        m.category = string_field(e, "category", path);
        m.parent_surface = e.value("parent_surface", "");
        m.salience = e.value("salience", 0.0);
        m.surface_bound = e.value("surface_bound", false);
        if (e.contains("size_hint")) m.size_hint = read_vec3(e["size_hint"], path + "/size_hint");
        s.entries.push_back(std::move(m));
    }
    return s;
}

inline json to_json(const Skeleton& sk) {
    json e = json::array();
    for (const auto& x : sk.e_parent) e.push_back(to_json(x));
    return {{"v_arch", sk.v_arch}, {"v_major", sk.v_major}, {"e_parent", e}, {"minor", to_json(sk.minor)}};
}

/// Sidecar invariants relative to the graph and description.
inline std::string check_sidecar(const MinorSidecar& s, const SceneGraph& g, const SceneDescription& d) {
    for (const auto& m : s.entries) {
        if (g.has(m.id)) return "minor id '" + m.id + "' collides with a graph node";
        if (m.surface_bound && !d.find(m.parent_surface))
            return "minor '" + m.id + "' references unknown parent '" + m.parent_surface + "'";
    }
    return {};
}

}  // namespace car
