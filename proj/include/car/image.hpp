#pragma once

// Minimal PNG encoding (8-bit RGB, 16-bit gray) and header probing.

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "car/memory.hpp"

namespace car {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, row 0 at the top

    RgbImage() = default;
    RgbImage(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0})
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3) {
        for (std::size_t i = 0; i < pixels.size(); i += 3) std::copy(fill.begin(), fill.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i));
    }

    std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3]; }
    const std::uint8_t* at(int x, int y) const {
        return &pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3];
    }
    void set(int x, int y, std::array<std::uint8_t, 3> c) { std::copy(c.begin(), c.end(), at(x, y)); }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

inline void put_chunk(std::string& out, const char* type, const std::string& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    put_u32(out, static_cast<std::uint32_t>(
                     crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

inline std::string encode_png(int width, int height, int bit_depth, int color_type, const std::string& raw_rows) {
    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr += static_cast<char>(bit_depth);
    ihdr += static_cast<char>(color_type);
    ihdr += std::string(3, '\0');
    put_chunk(out, "IHDR", ihdr);

    uLongf size = compressBound(static_cast<uLong>(raw_rows.size()));
    std::string z(size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &size, reinterpret_cast<const Bytef*>(raw_rows.data()),
                  static_cast<uLong>(raw_rows.size()), 6) != Z_OK)
        throw EmitError("png compression failed");
    z.resize(size);
    put_chunk(out, "IDAT", z);
    put_chunk(out, "IEND", "");
    return out;
}

}  // namespace detail

inline std::string encode_png(const RgbImage& img) {
    std::string rows;
    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    rows.reserve((stride + 1) * static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows.push_back('\0');
        rows.append(reinterpret_cast<const char*>(img.at(0, y)), stride);
    }
    return detail::encode_png(img.width, img.height, 8, 2, rows);
}

inline std::string encode_png_gray16(int width, int height, const std::vector<std::uint16_t>& values) {
    std::string rows;
    for (int y = 0; y < height; ++y) {
        rows.push_back('\0');
        for (int x = 0; x < width; ++x) {
            const std::uint16_t v = values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
            rows.push_back(static_cast<char>(v >> 8));
            rows.push_back(static_cast<char>(v & 0xFF));
        }
    }
    return detail::encode_png(width, height, 16, 0, rows);
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) { write_text(path, encode_png(img)); }

/// Width and height from a PNG header, if `bytes` looks like a PNG.
inline std::optional<std::pair<int, int>> png_size(std::string_view bytes) {
    if (bytes.size() < 24 || bytes.substr(0, 8) != std::string_view("\x89PNG\r\n\x1a\n", 8)) return std::nullopt;
    auto u32 = [&](std::size_t off) {
        std::uint32_t v = 0;
        for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[off + i]);
        return static_cast<int>(v);
    };
    return std::pair{u32(16), u32(20)};
}

/// Procedural checker texture, the offline stand-in for generated images.
inline RgbImage checker_image(int size, int cells, std::array<std::uint8_t, 3> a, std::array<std::uint8_t, 3> b) {
    RgbImage img(size, size);
    const int cell = std::max(1, size / std::max(1, cells));
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) img.set(x, y, ((x / cell + y / cell) % 2 == 0) ? a : b);
    return img;
}

}  // namespace car
