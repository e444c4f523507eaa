#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "scenegraft/errors.hpp"
#include "scenegraft/scene.hpp"

namespace scenegraft {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;  // row-major, top row first

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, Rgb{0, 0, 0}) {}

    Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    const Rgb& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

void write_png(const Image& img, const std::filesystem::path& path);

// PNG bytes in memory (for shipping snapshots over the wire).
std::vector<std::uint8_t> encode_png(const Image& img);

// FNV-1a over the raw pixel buffer; used for golden-image checks.
std::uint64_t image_hash(const Image& img);

std::string base64_encode(const std::uint8_t* data, std::size_t len);

}  // namespace scenegraft
