#pragma once

// Response schemas for model-facing stage outputs, and a validator for the
// JSON Schema subset they use: type, properties, required,
// additionalProperties, items, enum, minimum, maximum, minItems, maxItems,
// minLength.

#include <map>
#include <optional>
#include <string>

#include "car/common.hpp"

namespace car {

namespace detail {

inline bool type_matches(const json& v, std::string_view type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "number") return v.is_number();
    if (type == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    return false;
}

inline std::string at(const std::string& path) { return path.empty() ? "/" : path; }

}  // namespace detail

/// First violation of `schema` by `value`, as "<json pointer>: <reason>", or
/// nullopt when valid.
inline std::optional<std::string> check_schema(const json& value, const json& schema, const std::string& path = "") {
    using detail::at;
    if (schema.contains("type")) {
        const json& t = schema["type"];
        bool ok = false;
        if (t.is_string()) ok = detail::type_matches(value, t.get<std::string>());
        for (const auto& alt : t.is_array() ? t : json::array()) ok = ok || detail::type_matches(value, alt.get<std::string>());
        if (!ok) return at(path) + ": expected " + (t.is_string() ? t.get<std::string>() : t.dump());
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& e : schema["enum"]) found = found || e == value;
        if (!found) return at(path) + ": value " + value.dump() + " not in " + schema["enum"].dump();
    }
    if (value.is_number()) {
        const double x = value.get<double>();
        if (schema.contains("minimum") && x < schema["minimum"].get<double>())
            return at(path) + ": " + value.dump() + " below minimum " + schema["minimum"].dump();
        if (schema.contains("maximum") && x > schema["maximum"].get<double>())
            return at(path) + ": " + value.dump() + " above maximum " + schema["maximum"].dump();
    }
    if (value.is_string() && schema.contains("minLength") &&
        value.get<std::string>().size() < schema["minLength"].get<std::size_t>())
        return at(path) + ": string shorter than " + schema["minLength"].dump();
    if (value.is_array()) {
        if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>())
            return at(path) + ": fewer than " + schema["minItems"].dump() + " items";
        if (schema.contains("maxItems") && value.size() > schema["maxItems"].get<std::size_t>())
            return at(path) + ": more than " + schema["maxItems"].dump() + " items";
        if (schema.contains("items"))
            for (std::size_t i = 0; i < value.size(); ++i)
                if (auto err = check_schema(value[i], schema["items"], path + "/" + std::to_string(i))) return err;
    }
    if (value.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema["required"])
                if (!value.contains(key.get<std::string>()))
                    return path + "/" + key.get<std::string>() + ": missing required field";
        const json props = schema.value("properties", json::object());
        for (auto it = value.begin(); it != value.end(); ++it) {
            const std::string child = path + "/" + it.key();
            if (props.contains(it.key())) {
                if (auto err = check_schema(it.value(), props[it.key()], child)) return err;
            } else if (schema.contains("additionalProperties")) {
                const json& extra = schema["additionalProperties"];
                if (extra.is_boolean() && !extra.get<bool>()) return child + ": unexpected field";
                if (extra.is_object())
                    if (auto err = check_schema(it.value(), extra, child)) return err;
            }
        }
    }
    return std::nullopt;
}

namespace detail {

inline json num(std::optional<double> lo = std::nullopt, std::optional<double> hi = std::nullopt) {
    json j{{"type", "number"}};
    if (lo) j["minimum"] = *lo;
    if (hi) j["maximum"] = *hi;
    return j;
}
inline json str() { return {{"type", "string"}, {"minLength", 1}}; }
inline json vec(std::size_t n) { return {{"type", "array"}, {"items", num()}, {"minItems", n}, {"maxItems", n}}; }
inline json arr(json items) { return {{"type", "array"}, {"items", std::move(items)}}; }
inline json obj(json props, std::vector<std::string> required, bool closed = true) {
    json j{{"type", "object"}, {"properties", std::move(props)}, {"required", std::move(required)}};
    if (closed) j["additionalProperties"] = false;
    return j;
}
inline json strings() { return arr({{"type", "string"}}); }

inline json part_schema() {
    return obj({{"name", str()},
                {"primitive", {{"enum", {"box", "cylinder", "sphere", "cone", "plane", "torus"}}}},
                {"size", vec(3)},
                {"offset", vec(3)},
                {"rotation", vec(3)}},
               {"name", "primitive", "size", "offset"});
}

inline json material_schema() {
    return obj({{"target", str()},
                {"material_type", str()},
                {"base_color", vec(3)},
                {"roughness", num(0.0, 1.0)},
                {"metallic", num(0.0, 1.0)},
                {"specular", num(0.0, 1.0)}},
               {"target", "material_type", "base_color"});
}

}  // namespace detail

using SchemaRegistry = std::map<std::string, json, std::less<>>;

/// One schema per model-facing stage output, keyed by schema id.
inline const SchemaRegistry& stage_schemas() {
    using namespace detail;
    static const SchemaRegistry registry = [] {
        SchemaRegistry r;
        r["description"] = obj(
            {{"objects", arr(obj({{"id", str()},
                                  {"category", str()},
                                  {"placement_type", {{"enum", {"floor", "wall", "surface", "ceiling"}}}},
                                  {"parent", {{"type", {"string", "null"}}}},
                                  {"size_hint", vec(3)},
                                  {"zone", {{"type", "string"}}},
                                  {"minor", {{"type", "boolean"}}},
                                  {"anchors", arr(obj({{"relation", {{"enum", {"against_wall", "in_corner"}}}},
                                                       {"target", str()}},
                                                      {"relation", "target"}))}},
                                 {"id", "category", "placement_type"}))},
             {"zones", arr(obj({{"label", str()}, {"polygon", arr(vec(2))}}, {"label", "polygon"}))},
             {"architecture", arr(obj({{"id", str()},
                                       {"kind", {{"enum", {"wall", "door", "window", "opening", "built-in"}}}},
                                       {"a", vec(2)},
                                       {"b", vec(2)},
                                       {"metadata", {{"type", "object"}}}},
                                      {"id", "kind", "a", "b"}))},
             {"image_size", vec(2)},
             {"room_extent", vec(2)}},
            {"objects", "architecture", "room_extent"});
        r["graph_completion"] = obj(
            {{"edges", arr(obj({{"src", str()}, {"dst", str()}, {"relation", str()}}, {"src", "dst", "relation"}))},
             {"salience", {{"type", "object"}, {"additionalProperties", num(0.0, 1.0)}}}},
            {"edges"});
        r["layout_program"] = obj({{"version", str()}, {"shell", {{"type", "object"}}}, {"statements", arr({{"type", "object"}})}},
                                  {"version", "shell", "statements"});
        r["layout_feedback"] = obj(
            {{"score", num(0.0, 10.0)},
             {"issues", arr(obj({{"kind", {{"enum", {"missing_object", "overlap", "boundary_violation",
                                                    "relation_error", "extra_object", "scale_error"}}}},
                                 {"subjects", strings()},
                                 {"note", {{"type", "string"}}}},
                                {"kind", "subjects"}))}},
            {"score", "issues"});
        r["layout_edits"] = obj(
            {{"edits", arr(obj({{"op", {{"enum", {"move", "rotate", "resize", "add", "remove"}}}},
                                {"id", str()},
                                {"position", vec(3)},
                                {"yaw", num()},
                                {"size", vec(3)},
                                {"category", str()},
                                {"placement_type", {{"enum", {"floor", "wall", "surface", "ceiling"}}}},
                                {"parent", str()}},
                               {"op", "id"}))}},
            {"edits"});
        r["wall_layout"] = obj(
            {{"objects", arr(obj({{"id", str()}, {"position", vec(3)}, {"yaw", num()}, {"size", vec(3)}},
                                 {"id", "position"}))}},
            {"objects"});
        r["object_profile"] = obj(
            {{"profiles", arr(obj({{"id", str()},
                                   {"color", strings()},
                                   {"material", strings()},
                                   {"function", str()},
                                   {"structure", {{"type", "string"}}},
                                   {"style", strings()}},
                                  {"id", "color", "material", "function", "structure", "style"}))},
             {"room_style", obj({{"palette", strings()},
                                 {"style", strings()},
                                 {"mood", {{"type", "string"}}},
                                 {"lighting", {{"type", "string"}}}},
                                {"palette", "style"})}},
            {"profiles", "room_style"});
        r["part_decomposition"] = obj(
            {{"objects", {{"type", "object"},
                          {"additionalProperties",
                           obj({{"parts", arr(part_schema())}, {"retrieve", {{"type", "boolean"}}},
                                {"description", {{"type", "string"}}}},
                               {"parts"})}}}},
            {"objects"});
        r["material_set"] = obj({{"materials", arr(material_schema())}}, {"materials"});
        r["texture_set"] = obj(
            {{"textures", arr(obj({{"target", str()}, {"prompt", {{"type", "string"}}}, {"pattern", str()}},
                                  {"target"}))}},
            {"textures"});
        r["lighting_plan"] = obj(
            {{"sun", obj({{"enabled", {{"type", "boolean"}}},
                          {"direction", vec(3)},
                          {"strength", num(0.0)},
                          {"color", vec(3)}},
                         {"direction"})},
             {"windows", strings()},
             {"window_strength", num(0.0)},
             {"artificial", arr(obj({{"kind", {{"enum", {"point", "area", "spot"}}}},
                                     {"position", vec(3)},
                                     {"intensity", num(0.0)},
                                     {"color", vec(3)}},
                                    {"kind", "position", "intensity"}))},
             {"ambient", num(0.0)},
             {"resolution", {{"type", "integer"}, {"minimum", 16}}},
             {"samples", {{"type", "integer"}, {"minimum", 1}}}},
            {"sun"});
        return r;
    }();
    return registry;
}

inline const json& schema_for(std::string_view id) {
    const auto& r = stage_schemas();
    const auto it = r.find(id);
    if (it == r.end()) throw ConfigError("unregistered response schema '" + std::string(id) + "'");
    return it->second;
}

}  // namespace car
