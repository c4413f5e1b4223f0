#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <iterator>
#include <string_view>
#include <system_error>

#include <nlohmann/json.hpp>

namespace car {

using json = nlohmann::json;
using ObjectId = std::string;

// Error taxonomy. Each kind is a distinct type so callers (and the CLI's exit
// code mapping) can tell them apart.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StructuralError : Error { using Error::Error; };
struct ConflictError : Error { using Error::Error; };
struct LinkError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct LoadError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct TransportError : Error { using Error::Error; };
struct EmitError : Error { using Error::Error; };

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) noexcept { return {a.x * s, a.y * s}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {a.x * s, a.y * s}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec2 xy() const noexcept { return {x, y}; }

    friend constexpr Vec3 operator+(Vec3 a, Vec3 b) noexcept { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 b) noexcept { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double s) noexcept { return {a.x * s, a.y * s, a.z * s}; }
    friend constexpr bool operator==(Vec3, Vec3) = default;
};

inline constexpr double dot(Vec2 a, Vec2 b) noexcept { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(Vec2 a, Vec2 b) noexcept { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) noexcept { return std::hypot(a.x, a.y); }
inline double norm(Vec3 a) noexcept { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

inline Vec2 rotate(Vec2 v, double yaw) noexcept {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps an angle into [-pi, pi). Negative zero is folded to +0 so that
/// serialized poses never print "-0.0".
inline double normalize_yaw(double yaw) noexcept {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(yaw + std::numbers::pi, two_pi);
    if (r < 0.0) r += two_pi;
    r -= std::numbers::pi;
    if (r >= std::numbers::pi) r -= two_pi;
    if (r == 0.0) r = 0.0;
    return r;
}

/// Direction an object's front faces for a given yaw. Objects face local +Y.
inline Vec2 facing(double yaw) noexcept { return {-std::sin(yaw), std::cos(yaw)}; }

inline json to_json_vec(Vec2 v) { return json::array({v.x, v.y}); }
inline json to_json_vec(Vec3 v) { return json::array({v.x, v.y, v.z}); }

// 64-bit FNV-1a; stable across platforms, used for content hashes and
// palette lookup.
inline std::uint64_t fnv1a(std::string_view bytes) noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

/// Canonical JSON text: sorted keys (nlohmann's default object is ordered),
/// two-space indent, trailing newline.
inline std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

/// Shortest round-trip decimal for a double; used by code emitters.
inline std::string format_number(double v) {
    if (v == 0.0) return "0.0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw Error("number formatting failed");
    std::string s(buf, ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

// ---------------------------------------------------------------------------
// Files

inline void write_text(const std::filesystem::path& path, std::string_view text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + path.string());
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace car
