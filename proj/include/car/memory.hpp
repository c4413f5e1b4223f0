#pragma once

// Append-only cross-stage memory. Each stage reads a fixed view of earlier
// artifacts; the store is persisted as one JSON file per entry plus an index.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "car/common.hpp"

namespace car {

enum class ArtifactType {
    image,
    description,
    graph,
    sidecar,
    layout_program,
    critique,
    profile_set,
    room_style,
    geometry_dict,
    scene_program,
    report,
};

inline constexpr std::array<std::string_view, 11> kArtifactNames = {
    "image",      "description", "graph",         "sidecar",       "layout_program", "critique",
    "profile_set", "room_style", "geometry_dict", "scene_program", "report"};

inline std::string to_string(ArtifactType t) { return std::string(kArtifactNames[static_cast<std::size_t>(t)]); }

inline std::optional<ArtifactType> artifact_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kArtifactNames.size(); ++i)
        if (kArtifactNames[i] == s) return static_cast<ArtifactType>(i);
    return std::nullopt;
}

inline constexpr int kImageStage = 0;
inline constexpr const char* kMemorySchema = "car-memory/1";

struct EntryKey {
    int stage = 0;
    ArtifactType type = ArtifactType::image;
    int iteration = 0;
    auto operator<=>(const EntryKey&) const = default;
};

struct MemoryEntry {
    int stage = 0;
    ArtifactType artifact_type = ArtifactType::image;
    int iteration = 0;
    json payload;
    json metadata = json::object();

    EntryKey key() const { return {stage, artifact_type, iteration}; }
    friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

inline std::string entry_file_name(const EntryKey& k) {
    return "entry_" + std::to_string(k.stage) + "_" + to_string(k.type) + "_" + std::to_string(k.iteration) + ".json";
}

/// Which (stage, artifact type) pairs a stage may read.
using ViewTable = std::map<int, std::set<std::pair<int, ArtifactType>>>;

inline const ViewTable& default_view_table() {
    using A = ArtifactType;
    static const ViewTable table = {
        {1, {{0, A::image}}},
        {2, {{0, A::image}, {1, A::description}}},
        {3, {{0, A::image}, {1, A::description}, {2, A::graph}}},
        {4, {{0, A::image}, {1, A::description}, {2, A::graph}, {2, A::sidecar}, {3, A::layout_program}}},
        {5, {{0, A::image}, {4, A::layout_program}, {1, A::description}, {2, A::graph}}},
        {6, {{4, A::layout_program}, {5, A::profile_set}, {2, A::sidecar}, {2, A::graph}}},
        {8, {{6, A::geometry_dict}, {6, A::scene_program}, {5, A::profile_set}, {5, A::room_style}}},
        {9, {{8, A::scene_program}, {5, A::profile_set}, {5, A::room_style}}},
        {10, {{0, A::image}, {9, A::scene_program}}},
    };
    return table;
}

class MemoryStore {
public:
    MemoryStore() = default;
    explicit MemoryStore(ViewTable table) : table_(std::move(table)) {}

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const MemoryEntry& operator[](std::size_t i) const { return *entries_[i]; }
    const ViewTable& view_table() const noexcept { return table_; }

    bool contains(const EntryKey& k) const {
        return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e->key() == k; });
    }

    const MemoryEntry* find(const EntryKey& k) const {
        for (const auto& e : entries_)
            if (e->key() == k) return e.get();
        return nullptr;
    }

    /// Latest entry of `type` from `stage` (highest iteration).
    const MemoryEntry* latest(int stage, ArtifactType type) const {
        const MemoryEntry* best = nullptr;
        for (const auto& e : entries_)
            if (e->stage == stage && e->artifact_type == type && (!best || e->iteration > best->iteration))
                best = e.get();
        return best;
    }

    /// Returns a new store with `entry` appended; this store is unchanged and
    /// shares its entries with the result.
    [[nodiscard]] MemoryStore append(MemoryEntry entry) const {
        if (contains(entry.key()))
            throw ConflictError("memory already holds " + entry_file_name(entry.key()));
        MemoryStore out = *this;
        out.entries_.push_back(std::make_shared<const MemoryEntry>(std::move(entry)));
        return out;
    }

    std::vector<MemoryEntry> view(int stage) const {
        const auto it = table_.find(stage);
        if (it == table_.end()) throw ConfigError("no memory view for stage " + std::to_string(stage));
        std::vector<MemoryEntry> out;
        for (const auto& e : entries_)
            if (it->second.count({e->stage, e->artifact_type})) out.push_back(*e);
        return out;
    }

    /// Reduced view for the memory ablation: the image, the artifacts of the
    /// closest earlier stage, and the most recent program of any kind.
    std::vector<MemoryEntry> ablated_view(int stage) const {
        if (!table_.count(stage)) throw ConfigError("no memory view for stage " + std::to_string(stage));
        int prev = -1;
        for (const auto& e : entries_)
            if (e->stage < stage && e->stage != kImageStage) prev = std::max(prev, e->stage);
        const MemoryEntry* program = nullptr;
        for (const auto& e : entries_)
            if (e->stage < stage && (e->artifact_type == ArtifactType::layout_program ||
                                     e->artifact_type == ArtifactType::scene_program))
                if (!program || e->stage >= program->stage) program = e.get();
        std::vector<MemoryEntry> out;
        for (const auto& e : entries_)
            if (e->stage == kImageStage || e->stage == prev || e.get() == program) out.push_back(*e);
        return out;
    }

    friend bool operator==(const MemoryStore& a, const MemoryStore& b) {
        if (a.entries_.size() != b.entries_.size()) return false;
        for (std::size_t i = 0; i < a.entries_.size(); ++i)
            if (!(*a.entries_[i] == *b.entries_[i])) return false;
        return true;
    }

private:
    std::vector<std::shared_ptr<const MemoryEntry>> entries_;
    ViewTable table_ = default_view_table();
};

/// The view slice of one artifact, by type (latest iteration wins).
inline const MemoryEntry* pick(const std::vector<MemoryEntry>& view, ArtifactType type) {
    const MemoryEntry* best = nullptr;
    for (const auto& e : view)
        if (e.artifact_type == type && (!best || e.stage > best->stage ||
                                        (e.stage == best->stage && e.iteration > best->iteration)))
            best = &e;
    return best;
}

inline json to_json(const MemoryEntry& e) {
    return {{"schema", kMemorySchema},
            {"stage", e.stage},
            {"artifact_type", to_string(e.artifact_type)},
            {"iteration", e.iteration},
            {"payload", e.payload},
            {"metadata", e.metadata}};
}

inline MemoryEntry entry_from_json(const json& j, const std::string& origin) {
    try {
        if (j.at("schema").get<std::string>() != kMemorySchema) throw LoadError(origin + ": unsupported schema");
        MemoryEntry e;
        e.stage = j.at("stage").get<int>();
        const auto type = artifact_from_string(j.at("artifact_type").get<std::string>());
        if (!type) throw LoadError(origin + ": unknown artifact_type");
        e.artifact_type = *type;
        e.iteration = j.at("iteration").get<int>();
        e.payload = j.at("payload");
        e.metadata = j.at("metadata");
        return e;
    } catch (const json::exception& ex) {
        throw LoadError(origin + ": " + ex.what());
    }
}

inline void persist(const MemoryStore& store, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json index = json::array();
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& e = store[i];
        const std::string name = entry_file_name(e.key());
        write_text(dir / name, canonical_dump(to_json(e)));
        index.push_back(name);
    }
    write_text(dir / "index.json", canonical_dump({{"schema", kMemorySchema}, {"entries", index}}));
}

inline MemoryStore load_memory(const std::filesystem::path& dir, ViewTable table = default_view_table()) {
    const auto index_path = dir / "index.json";
    json index;
    try {
        index = json::parse(read_text(index_path));
    } catch (const json::exception& e) {
        throw LoadError(index_path.string() + ": " + e.what());
    }
    if (!index.is_object() || !index.contains("entries") || !index["entries"].is_array())
        throw LoadError(index_path.string() + ": missing entries list");
    MemoryStore store(std::move(table));
    for (const auto& name : index["entries"]) {
        if (!name.is_string()) throw LoadError(index_path.string() + ": entry names must be strings");
        const auto path = dir / name.get<std::string>();
        json j;
        try {
            j = json::parse(read_text(path));
        } catch (const json::exception& e) {
            throw LoadError(path.string() + ": " + e.what());
        }
        store = store.append(entry_from_json(j, path.string()));
    }
    return store;
}

}  // namespace car
