#include "scenegraft/image.hpp"

#include <cstring>

#include <png.h>

namespace scenegraft {

namespace {

void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

void encode_png_impl(const Image& img, std::vector<std::uint8_t>* mem, FILE* file) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng: cannot create info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng: encode failed");
    }
    if (mem) {
        png_set_write_fn(png, mem, png_write_to_vector, nullptr);
    } else {
        png_init_io(png, file);
    }
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] = const_cast<png_bytep>(reinterpret_cast<const png_byte*>(img.pixels.data()) +
                                        static_cast<std::size_t>(y) * img.width * 3);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png(const Image& img, const std::filesystem::path& path) {
    FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path.string());
    try {
        encode_png_impl(img, nullptr, f);
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    std::vector<std::uint8_t> out;
    encode_png_impl(img, &out, nullptr);
    return out;
}

std::uint64_t image_hash(const Image& img) {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&h](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const std::uint8_t*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    const std::int32_t dims[2] = {img.width, img.height};
    feed(dims, sizeof(dims));
    feed(img.pixels.data(), img.pixels.size() * 3);
    return h;
}

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
    static const char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        std::uint32_t v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out.push_back(table[(v >> 18) & 63]);
        out.push_back(table[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? table[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? table[v & 63] : '=');
    }
    return out;
}

}  // namespace scenegraft
