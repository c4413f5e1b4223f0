#pragma once

// Asset library retrieval for small, visually distinctive objects: lexical
// match scoring, thresholded selection, and placeholder substitution.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "car/program.hpp"

namespace car {

struct AssetRecord {
    std::string asset_id;
    std::string label;
    std::string description;
    Vec3 canonical_size;
    std::vector<std::string> tags;
    std::string mesh_ref;  // relative to the library root
    Vec2 support_footprint;
};

struct MatchQuery {
    std::string label;
    std::string description;
    Vec3 placeholder_size;
};

struct MatchWeights {
    double label = 0.4;
    double description = 0.2;
    double size = 0.4;
};

struct AssetLibrary {
    std::filesystem::path root;
    std::vector<AssetRecord> records;

    const AssetRecord* find(std::string_view id) const {
        for (const auto& r : records)
            if (r.asset_id == id) return &r;
        return nullptr;
    }
};

/// Lowercase alphanumeric tokens.
inline std::set<std::string> tokenize(std::string_view text) {
    std::set<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.insert(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.insert(std::move(cur));
    return out;
}

namespace detail {

inline std::size_t common_count(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::size_t n = 0;
    for (const auto& t : a) n += b.count(t);
    return n;
}

}  // namespace detail

/// Jaccard overlap of label tokens.
inline double label_similarity(std::string_view a, std::string_view b) {
    const auto ta = tokenize(a), tb = tokenize(b);
    const std::size_t common = detail::common_count(ta, tb);
    const std::size_t total = ta.size() + tb.size() - common;
    return total == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(total);
}

/// Cosine similarity of binary token-set vectors.
inline double description_similarity(std::string_view a, std::string_view b) {
    const auto ta = tokenize(a), tb = tokenize(b);
    if (ta.empty() || tb.empty()) return 0.0;
    return static_cast<double>(detail::common_count(ta, tb)) /
           std::sqrt(static_cast<double>(ta.size()) * static_cast<double>(tb.size()));
}

inline double size_compatibility(Vec3 asset, Vec3 placeholder) {
    const double l1 = std::abs(std::log(asset.x / placeholder.x)) + std::abs(std::log(asset.y / placeholder.y)) +
                      std::abs(std::log(asset.z / placeholder.z));
    return std::exp(-l1);
}

inline double match_score(const AssetRecord& b, const MatchQuery& q, const MatchWeights& w = {}) {
    const double s = w.label * label_similarity(b.label, q.label) +
                     w.description * description_similarity(b.description, q.description) +
                     w.size * size_compatibility(b.canonical_size, q.placeholder_size);
    return std::clamp(s, 0.0, 1.0);
}

inline constexpr double kMatchFloor = 0.3;

/// Highest-scoring record at or above `floor`; ties go to the smaller asset id.
inline std::optional<AssetRecord> select_asset(const AssetLibrary& library, const MatchQuery& q,
                                               double floor = kMatchFloor, const MatchWeights& w = {}) {
    const AssetRecord* best = nullptr;
    double best_score = -1.0;
    for (const auto& r : library.records) {
        const double s = match_score(r, q, w);
        if (s < floor) continue;
        if (s > best_score || (s == best_score && r.asset_id < best->asset_id)) {
            best = &r;
            best_score = s;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

inline constexpr double kMaxAspectDistortion = 1.5;

/// Per-axis scale mapping `canonical` onto `target`, pulled toward the
/// geometric mean until the largest/smallest component ratio is at most
/// `max_distortion`.
inline Vec3 fit_scale(Vec3 canonical, Vec3 target, double max_distortion = kMaxAspectDistortion) {
    const Vec3 raw{target.x / canonical.x, target.y / canonical.y, target.z / canonical.z};
    const double g = std::cbrt(raw.x * raw.y * raw.z);
    const double k = std::sqrt(max_distortion);
    const auto clamp = [&](double v) { return std::clamp(v, g / k, g * k); };
    return {clamp(raw.x), clamp(raw.y), clamp(raw.z)};
}

/// Replaces placeholder proxy `placeholder_id` by an instance of `asset` at the
/// same pose, parent, and placement. Every other statement is untouched.
inline SceneProgram substitute_placeholder(const SceneProgram& program, std::string_view placeholder_id,
                                           const AssetRecord& asset) {
    SceneProgram out = program;
    Statement* s = find_object(out, placeholder_id);
    const auto* proxy = s ? std::get_if<Proxy>(s) : nullptr;
    if (!proxy) throw LinkError("substitute_placeholder: no placeholder proxy '" + std::string(placeholder_id) + "'");
    AssetInstance inst;
    inst.id = proxy->id;
    inst.category = proxy->category;
    inst.asset_id = asset.asset_id;
    inst.mesh_ref = asset.mesh_ref;
    inst.pose = proxy->pose;
    inst.canonical_size = asset.canonical_size;
    inst.scale = fit_scale(asset.canonical_size, proxy->size);
    inst.parent = proxy->parent;
    inst.placement_type = proxy->placement_type;
    *s = inst;
    validate(out);
    return out;
}

// ---------------------------------------------------------------------------
// Library manifest: {"version": 1, "assets": [{asset_id, label, description,
// canonical_size, tags, mesh_ref, support_footprint}]}

inline AssetRecord asset_from_json(const json& j, const std::string& path) {
    try {
        AssetRecord r;
        r.asset_id = j.at("asset_id").get<std::string>();
        r.label = j.at("label").get<std::string>();
        r.description = j.value("description", "");
        const auto& sz = j.at("canonical_size");
        r.canonical_size = {sz.at(0).get<double>(), sz.at(1).get<double>(), sz.at(2).get<double>()};
        r.tags = j.value("tags", std::vector<std::string>{});
        r.mesh_ref = j.at("mesh_ref").get<std::string>();
        const auto& fp = j.at("support_footprint");
        r.support_footprint = {fp.at(0).get<double>(), fp.at(1).get<double>()};
        if (!(r.canonical_size.x > 0 && r.canonical_size.y > 0 && r.canonical_size.z > 0))
            throw LoadError(path + ".canonical_size: sizes must be positive");
        return r;
    } catch (const json::exception& e) {
        throw LoadError(path + ": " + e.what());
    }
}

inline json to_json(const AssetRecord& r) {
    return {{"asset_id", r.asset_id},
            {"label", r.label},
            {"description", r.description},
            {"canonical_size", to_json_vec(r.canonical_size)},
            {"tags", r.tags},
            {"mesh_ref", r.mesh_ref},
            {"support_footprint", to_json_vec(r.support_footprint)}};
}

/// Loads `<root>/index.json` and checks every mesh file exists.
inline AssetLibrary load_library(const std::filesystem::path& root) {
    const auto index = root / "index.json";
    std::ifstream in(index);
    if (!in) throw LoadError("cannot open asset index " + index.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw LoadError(index.string() + ": " + e.what());
    }
    AssetLibrary lib;
    lib.root = root;
    std::set<std::string> seen;
    const json& assets = j.contains("assets") ? j["assets"] : json::array();
    for (std::size_t i = 0; i < assets.size(); ++i) {
        AssetRecord r = asset_from_json(assets[i], index.string() + ":assets[" + std::to_string(i) + "]");
        if (!seen.insert(r.asset_id).second) throw LoadError(index.string() + ": duplicate asset id " + r.asset_id);
        std::error_code ec;
        if (!std::filesystem::is_regular_file(root / r.mesh_ref, ec))
            throw LoadError(index.string() + ": mesh '" + r.mesh_ref + "' of " + r.asset_id + " not found");
        lib.records.push_back(std::move(r));
    }
    return lib;
}

}  // namespace car
