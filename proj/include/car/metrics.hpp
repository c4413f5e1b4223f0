#pragma once

// Benchmark evaluator: compares a generated program against an annotated
// ground-truth scene. Every rate lies in [0,1].

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "car/geometry.hpp"
#include "car/program.hpp"

namespace car {

struct AnnotatedRelation {
    ObjectId subject;
    std::string relation;
    ObjectId object;
};

struct AnnotatedZone {
    std::string label;
    std::vector<Vec2> polygon;  // room coordinates, meters
    std::vector<std::string> required;  // anchor categories
};

struct Annotation {
    SceneProgram gt;
    std::vector<AnnotatedRelation> relations;
    std::vector<AnnotatedZone> zones;
    std::map<std::string, std::string> category_aliases;  // synonym -> canonical
    // Categories whose yaw is only defined modulo 2*pi/n.
    std::map<std::string, int> rotation_symmetry{{"table", 2}, {"coffee_table", 2}, {"dining_table", 2}, {"rug", 2}};
};

struct MetricsConfig {
    double yaw_tolerance_deg = 15.0;
    double deadband = 0.05;
    double adjacency = 0.30;
    double raster_cell = 0.01;
    double support_z_tolerance = 0.05;
    double facing_tolerance_deg = 45.0;
    double flat_height = 0.03;
};

struct Match {
    ObjectId gt;
    ObjectId pred;
    double distance = 0.0;
};

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

inline Vec2 center_of(const Statement& s) { return footprint_of(s).center; }

}  // namespace detail

inline std::string canonical_category(std::string_view category, const std::map<std::string, std::string>& aliases) {
    std::string c = detail::lower(category);
    for (int guard = 0; guard < 8; ++guard) {
        const auto it = aliases.find(c);
        if (it == aliases.end() || it->second == c) break;
        c = detail::lower(it->second);
    }
    return c;
}

/// Category-constrained greedy matching by nearest footprint center. Each gt
/// and each predicted object is used at most once.
inline std::vector<Match> match_objects(const SceneProgram& pred, const SceneProgram& gt,
                                        const std::map<std::string, std::string>& aliases) {
    struct Candidate {
        double d;
        const ObjectId* g;
        const ObjectId* p;
    };
    std::vector<Candidate> cands;
    const auto gts = objects_of(gt);
    const auto preds = objects_of(pred);
    for (const auto* g : gts)
        for (const auto* p : preds)
            if (canonical_category(object_category(*g), aliases) == canonical_category(object_category(*p), aliases))
                cands.push_back({norm(detail::center_of(*g) - detail::center_of(*p)), object_id(*g), object_id(*p)});
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.d != b.d) return a.d < b.d;
        if (*a.g != *b.g) return *a.g < *b.g;
        return *a.p < *b.p;
    });
    std::set<ObjectId> used_g, used_p;
    std::vector<Match> out;
    for (const auto& c : cands) {
        if (used_g.count(*c.g) || used_p.count(*c.p)) continue;
        used_g.insert(*c.g);
        used_p.insert(*c.p);
        out.push_back({*c.g, *c.p, c.d});
    }
    std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) { return a.gt < b.gt; });
    return out;
}

inline double object_recall(const SceneProgram& pred, const SceneProgram& gt,
                            const std::map<std::string, std::string>& aliases = {}) {
    const auto total = objects_of(gt).size();
    if (total == 0) return 1.0;
    return static_cast<double>(match_objects(pred, gt, aliases).size()) / static_cast<double>(total);
}

inline double functional_accuracy(const SceneProgram& pred, const Annotation& a, json* evidence = nullptr) {
    if (a.zones.empty()) return 1.0;
    std::size_t satisfied = 0;
    for (const auto& zone : a.zones) {
        bool ok = true;
        for (const auto& req : zone.required) {
            const std::string want = canonical_category(req, a.category_aliases);
            bool found = false;
            for (const auto* s : objects_of(pred))
                if (canonical_category(object_category(*s), a.category_aliases) == want &&
                    point_in_polygon(detail::center_of(*s), zone.polygon)) {
                    found = true;
                    break;
                }
            ok = ok && found;
        }
        if (ok) ++satisfied;
        if (evidence) evidence->push_back({{"zone", zone.label}, {"satisfied", ok}});
    }
    return static_cast<double>(satisfied) / static_cast<double>(a.zones.size());
}

inline bool is_flat(const Statement& s, double flat_height) {
    const auto [lo, hi] = vertical_extent(s);
    return hi - lo <= flat_height;
}

/// Total pairwise footprint overlap among floor objects that are not related
/// by support, divided by their total footprint area. Flat coverings such as
/// rugs are excluded.
inline double self_overlap(const SceneProgram& pred, const MetricsConfig& cfg = {}, json* evidence = nullptr) {
    std::vector<const Statement*> floor;
    for (const auto* s : objects_of(pred))
        if (object_placement(*s) == PlacementType::floor && !is_flat(*s, cfg.flat_height)) floor.push_back(s);
    auto related = [&](const Statement& a, const Statement& b) {
        auto ancestor = [&](const Statement& x, const ObjectId& anc) {
            const Statement* cur = &x;
            for (int guard = 0; guard < 64 && cur && object_parent(*cur); ++guard) {
                if (*object_parent(*cur) == anc) return true;
                cur = find_object(pred, *object_parent(*cur));
            }
            return false;
        };
        return ancestor(a, *object_id(b)) || ancestor(b, *object_id(a));
    };
    double overlap = 0.0, area = 0.0;
    for (std::size_t i = 0; i < floor.size(); ++i) {
        area += footprint_of(*floor[i]).area();
        for (std::size_t j = i + 1; j < floor.size(); ++j) {
            if (related(*floor[i], *floor[j])) continue;
            const double o = overlap_area(footprint_of(*floor[i]), footprint_of(*floor[j]));
            if (o > 0.0 && evidence)
                evidence->push_back({{"pair", {*object_id(*floor[i]), *object_id(*floor[j])}}, {"overlap", o}});
            overlap += o;
        }
    }
    return area > 0.0 ? std::clamp(overlap / area, 0.0, 1.0) : 0.0;
}

/// Occupancy mask of all object footprints sampled at cell centers of the
/// `target` shell; `source` coordinates are stretched onto it.
inline std::vector<std::uint8_t> occupancy_mask(const SceneProgram& source, const RoomShell& target, double cell) {
    const int nx = std::max(1, static_cast<int>(std::llround(target.width / cell)));
    const int ny = std::max(1, static_cast<int>(std::llround(target.depth / cell)));
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0);
    const double sx = source.shell.width / target.width;
    const double sy = source.shell.depth / target.depth;
    for (const auto* s : objects_of(source)) {
        std::vector<Footprint> pieces;
        if (const auto* a = std::get_if<Assembly>(s)) {
            for (const auto& part : a->parts) pieces.push_back(part_footprint(a->pose, part));
        } else {
            pieces.push_back(footprint_of(*s));
        }
        for (const auto& f : pieces) {
            if (f.degenerate()) continue;
            const Vec2 h = f.aabb_half();
            const int i0 = std::max(0, static_cast<int>(std::floor((f.center.x - h.x) / sx / cell)) - 1);
            const int i1 = std::min(nx - 1, static_cast<int>(std::ceil((f.center.x + h.x) / sx / cell)) + 1);
            const int j0 = std::max(0, static_cast<int>(std::floor((f.center.y - h.y) / sy / cell)) - 1);
            const int j1 = std::min(ny - 1, static_cast<int>(std::ceil((f.center.y + h.y) / sy / cell)) + 1);
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i) {
                    const Vec2 c{(i + 0.5) * cell * sx, (j + 0.5) * cell * sy};
                    if (f.contains_point(c, 0.0)) mask[static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i)] = 1;
                }
        }
    }
    return mask;
}

inline double layout_iou(const SceneProgram& pred, const SceneProgram& gt, const MetricsConfig& cfg = {}) {
    const auto a = occupancy_mask(pred, gt.shell, cfg.raster_cell);
    const auto b = occupancy_mask(gt, gt.shell, cfg.raster_cell);
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += (a[i] & b[i]);
        uni += (a[i] | b[i]);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

inline double angle_between(Vec2 a, Vec2 b) {
    const double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::acos(std::clamp(dot(a, b) / (na * nb), -1.0, 1.0));
}

/// Whether `child` rests on a support surface of `supporter`.
inline bool rests_on(const Statement& child, const Statement& supporter, double z_tol) {
    const Vec2 c = center_of(child);
    const double z = object_pose(child).position.z;
    for (const auto& surf : support_surfaces_of(supporter))
        if (surf.rect.contains_point(c, 1e-9) && std::abs(z - surf.height) <= z_tol) return true;
    return false;
}

inline const WallSegment* find_wall(const RoomShell& shell, std::string_view id) {
    for (const auto& w : shell.walls)
        if (w.id == id) return &w;
    return nullptr;
}

inline double wall_gap(const Footprint& f, const WallSegment& w) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& c : f.corners()) best = std::min(best, point_segment_distance(c, w.a, w.b));
    return best;
}

}  // namespace detail

/// Geometric check of one relation between predicted objects. `object` may
/// name a wall for against_wall and in_corner.
inline bool relation_holds(const SceneProgram& pred, const Statement& subj, std::string_view relation,
                           const Statement* obj, std::string_view object_ref, const MetricsConfig& cfg) {
    using namespace detail;
    const Vec2 s = center_of(subj);
    if (relation == "against_wall" || relation == "in_corner") {
        const WallSegment* w = find_wall(pred.shell, object_ref);
        if (!w) return false;
        const Footprint f = footprint_of(subj);
        if (wall_gap(f, *w) >= cfg.adjacency) return false;
        if (relation == "against_wall") return true;
        for (const auto& other : pred.shell.walls)
            if (other.id != w->id && wall_gap(f, other) < cfg.adjacency) return true;
        return false;
    }
    if (!obj) return false;
    const Vec2 o = center_of(*obj);
    if (relation == "left_of") return s.x < o.x - cfg.deadband;
    if (relation == "right_of") return s.x > o.x + cfg.deadband;
    if (relation == "front_of") return s.y < o.y - cfg.deadband;
    if (relation == "behind") return s.y > o.y + cfg.deadband;
    if (relation == "adjacent_to") return gap_distance(footprint_of(subj), footprint_of(*obj)) < cfg.adjacency;
    if (relation == "on_top_of" || relation == "child_of") return rests_on(subj, *obj, cfg.support_z_tolerance);
    if (relation == "under" || relation == "parent_of") return rests_on(*obj, subj, cfg.support_z_tolerance);
    if (relation == "faces")
        return angle_between(facing(object_pose(subj).yaw), o - s) <= cfg.facing_tolerance_deg * std::numbers::pi / 180.0;
    return false;
}

inline double spatial_relation(const SceneProgram& pred, const Annotation& a, const MetricsConfig& cfg = {},
                               json* evidence = nullptr) {
    if (a.relations.empty()) return 1.0;
    std::map<ObjectId, ObjectId> to_pred;
    for (const auto& m : match_objects(pred, a.gt, a.category_aliases)) to_pred[m.gt] = m.pred;
    std::size_t passed = 0;
    for (const auto& r : a.relations) {
        bool ok = false;
        const auto si = to_pred.find(r.subject);
        if (si != to_pred.end()) {
            const Statement* subj = find_object(pred, si->second);
            const auto oi = to_pred.find(r.object);
            const Statement* obj = oi != to_pred.end() ? find_object(pred, oi->second) : nullptr;
            const bool wall_target = r.relation == "against_wall" || r.relation == "in_corner";
            if (wall_target || obj) ok = relation_holds(pred, *subj, r.relation, obj, r.object, cfg);
        }
        if (ok) ++passed;
        if (evidence) evidence->push_back({{"relation", {r.subject, r.relation, r.object}}, {"holds", ok}});
    }
    return static_cast<double>(passed) / static_cast<double>(a.relations.size());
}

inline double yaw_error(double a, double b, int symmetry) {
    const double period = 2.0 * std::numbers::pi / std::max(1, symmetry);
    double d = std::fmod(std::abs(a - b), period);
    return std::min(d, period - d);
}

inline double rotation_accuracy(const SceneProgram& pred, const Annotation& a, const MetricsConfig& cfg = {},
                                std::vector<std::string>* warnings = nullptr, json* evidence = nullptr) {
    const auto matches = match_objects(pred, a.gt, a.category_aliases);
    if (matches.empty()) {
        if (warnings) warnings->push_back("rotation_accuracy: no matched objects");
        return 0.0;
    }
    std::size_t correct = 0;
    for (const auto& m : matches) {
        const Statement* g = find_object(a.gt, m.gt);
        const Statement* p = find_object(pred, m.pred);
        const std::string cat = canonical_category(object_category(*g), a.category_aliases);
        const auto sym = a.rotation_symmetry.find(cat);
        const double err = yaw_error(object_pose(*g).yaw, object_pose(*p).yaw, sym == a.rotation_symmetry.end() ? 1 : sym->second);
        const bool ok = err <= cfg.yaw_tolerance_deg * std::numbers::pi / 180.0 + 1e-12;
        if (ok) ++correct;
        if (evidence) evidence->push_back({{"gt", m.gt}, {"pred", m.pred}, {"yaw_error_deg", err * 180.0 / std::numbers::pi}});
    }
    return static_cast<double>(correct) / static_cast<double>(matches.size());
}

inline double support_accuracy(const SceneProgram& pred, const Annotation& a, const MetricsConfig& cfg = {},
                               json* evidence = nullptr) {
    std::map<ObjectId, ObjectId> to_pred;
    for (const auto& m : match_objects(pred, a.gt, a.category_aliases)) to_pred[m.gt] = m.pred;
    std::size_t pairs = 0, correct = 0;
    for (const auto* g : objects_of(a.gt)) {
        const auto& parent = object_parent(*g);
        if (!parent) continue;
        ++pairs;
        bool ok = false;
        const auto ci = to_pred.find(*object_id(*g));
        const auto pi = to_pred.find(*parent);
        if (ci != to_pred.end() && pi != to_pred.end())
            ok = detail::rests_on(*find_object(pred, ci->second), *find_object(pred, pi->second), cfg.support_z_tolerance);
        if (ok) ++correct;
        if (evidence) evidence->push_back({{"child", *object_id(*g)}, {"supporter", *parent}, {"correct", ok}});
    }
    return pairs == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------
// Execution rate

struct ExecutionResult {
    bool available = false;
    double rate = 0.0;
    std::vector<bool> ok;
};

/// Runs `argv` with a wall-clock limit. Returns the exit status, or -1 on
/// timeout or abnormal termination.
inline int run_process(const std::vector<std::string>& argv, std::chrono::seconds timeout) {
    const pid_t pid = fork();
    if (pid < 0) return -1;
    if (pid == 0) {
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        if (!std::freopen("/dev/null", "w", stdout)) _exit(127);
        execv(args[0], args.data());
        _exit(127);
    }
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    int status = 0;
    while (true) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) return -1;
        if (std::chrono::steady_clock::now() > deadline) {
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            return -1;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Blender executable from `explicit_path`, $CAR_BLENDER, or PATH.
inline std::optional<std::filesystem::path> find_blender(const std::filesystem::path& explicit_path = {}) {
    auto executable = [](const std::filesystem::path& p) { return !p.empty() && access(p.c_str(), X_OK) == 0; };
    if (!explicit_path.empty()) return executable(explicit_path) ? std::optional(explicit_path) : std::nullopt;
    if (const char* env = std::getenv("CAR_BLENDER"); env && executable(env)) return std::filesystem::path(env);
    if (const char* path = std::getenv("PATH")) {
        std::string_view rest(path);
        while (!rest.empty()) {
            const auto colon = rest.find(':');
            const std::filesystem::path candidate = std::filesystem::path(rest.substr(0, colon)) / "blender";
            if (executable(candidate)) return candidate;
            if (colon == std::string_view::npos) break;
            rest.remove_prefix(colon + 1);
        }
    }
    return std::nullopt;
}

/// Fraction of scripts whose headless Blender run exits 0 within `timeout`.
/// Unavailable (not zero) when no Blender executable is found.
inline ExecutionResult execution_rate(const std::vector<std::filesystem::path>& scripts,
                                      const std::filesystem::path& blender = {},
                                      std::chrono::seconds timeout = std::chrono::seconds(300)) {
    ExecutionResult r;
    const auto exe = find_blender(blender);
    if (!exe) return r;
    r.available = true;
    std::size_t passed = 0;
    for (const auto& script : scripts) {
        const auto render = std::filesystem::temp_directory_path() / ("car_render_" + hex64(fnv1a(script.string())) + ".png");
        const int code =
            run_process({exe->string(), "--background", "--factory-startup", "--python", script.string(), "--", render.string()}, timeout);
        r.ok.push_back(code == 0);
        passed += code == 0;
    }
    r.rate = scripts.empty() ? 1.0 : static_cast<double>(passed) / static_cast<double>(scripts.size());
    return r;
}

// ---------------------------------------------------------------------------
// Report

struct MetricsReport {
    double obj_recall = 0.0;
    double func_acc = 0.0;
    double self_overlap = 0.0;
    double layout_iou = 0.0;
    double spatial_relation = 0.0;
    double rotation_acc = 0.0;
    double support_acc = 0.0;
    bool completion = true;
    std::optional<bool> exec_ok;
    bool exec_available = false;
    json evidence = json::object();
    std::vector<std::string> warnings;
};

inline MetricsReport evaluate(const SceneProgram& pred, const Annotation& a, const MetricsConfig& cfg = {}) {
    MetricsReport r;
    json func = json::array(), overlap = json::array(), rel = json::array(), rot = json::array(), sup = json::array();
    r.obj_recall = object_recall(pred, a.gt, a.category_aliases);
    r.func_acc = functional_accuracy(pred, a, &func);
    r.self_overlap = self_overlap(pred, cfg, &overlap);
    r.layout_iou = layout_iou(pred, a.gt, cfg);
    r.spatial_relation = spatial_relation(pred, a, cfg, &rel);
    r.rotation_acc = rotation_accuracy(pred, a, cfg, &r.warnings, &rot);
    r.support_acc = support_accuracy(pred, a, cfg, &sup);
    json matches = json::array();
    for (const auto& m : match_objects(pred, a.gt, a.category_aliases)) matches.push_back({m.gt, m.pred});
    r.evidence = {{"matches", matches},
                  {"functional", func},
                  {"self_overlap", overlap},
                  {"spatial_relation", rel},
                  {"rotation", rot},
                  {"support", sup}};
    return r;
}

inline constexpr std::array<std::string_view, 7> kRateColumns = {
    "obj_recall", "func_acc", "self_overlap", "layout_iou", "spatial_relation", "rotation_acc", "support_acc"};

inline json to_json(const MetricsReport& r) {
    json j{{"obj_recall", r.obj_recall},
           {"func_acc", r.func_acc},
           {"self_overlap", r.self_overlap},
           {"layout_iou", r.layout_iou},
           {"spatial_relation", r.spatial_relation},
           {"rotation_acc", r.rotation_acc},
           {"support_acc", r.support_acc},
           {"completion", r.completion},
           {"image_similarity", "unscored"},
           {"usability", "unscored"},
           {"aesthetics", "unscored"},
           {"warnings", r.warnings},
           {"evidence", r.evidence}};
    if (!r.exec_available)
        j["exec_ok"] = "unavailable";
    else
        j["exec_ok"] = r.exec_ok.value_or(false);
    return j;
}

inline Annotation annotation_from_json(const json& j, const std::filesystem::path& base = ".") {
    Annotation a;
    try {
        if (j.contains("gt_program")) {
            a.gt = program_from_json(j["gt_program"]);
        } else {
            a.gt = parse(read_text(base / j.at("gt_program_path").get<std::string>()));
        }
        for (const auto& r : j.value("relations", json::array())) {
            if (r.is_array())
                a.relations.push_back({r.at(0).get<std::string>(), r.at(1).get<std::string>(), r.at(2).get<std::string>()});
            else
                a.relations.push_back({r.at("subject").get<std::string>(), r.at("relation").get<std::string>(),
                                       r.at("object").get<std::string>()});
        }
        for (const auto& z : j.value("zones", json::array())) {
            AnnotatedZone zone;
            zone.label = z.at("label").get<std::string>();
            for (const auto& p : z.at("polygon")) zone.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            zone.required = z.value("required", std::vector<std::string>{});
            a.zones.push_back(std::move(zone));
        }
        if (j.contains("category_aliases")) a.category_aliases = j["category_aliases"].get<std::map<std::string, std::string>>();
        if (j.contains("rotation_symmetry")) a.rotation_symmetry = j["rotation_symmetry"].get<std::map<std::string, int>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("annotation: ") + e.what());
    }
    for (const auto& r : a.relations) {
        if (!find_object(a.gt, r.subject)) throw ParseError("annotation: relation subject '" + r.subject + "' not in gt");
        const bool wall = r.relation == "against_wall" || r.relation == "in_corner";
        if (!wall && !find_object(a.gt, r.object)) throw ParseError("annotation: relation object '" + r.object + "' not in gt");
    }
    return a;
}

}  // namespace car
