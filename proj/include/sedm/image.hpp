#pragma once

#include <cstdint>
#include <fstream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "sedm/error.hpp"

#ifdef SEDM_WITH_PNG
#include <png.h>
#endif

namespace sedm {

/// 8-bit grayscale image, row-major.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

/// Boolean foreground mask, row-major.
struct BinaryMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // 0 or 1

    std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
    std::uint8_t& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (auto v : pixels) n += v != 0;
        return n;
    }
};

/// Nonzero pixels become foreground.
inline BinaryMask binarize(const GrayImage& img) {
    BinaryMask m{img.width, img.height, std::vector<std::uint8_t>(img.pixels.size())};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) m.pixels[i] = img.pixels[i] != 0 ? 1 : 0;
    return m;
}

// --------------------------------------------------------------------------
// Netpbm PGM (P2/P5) support.
// --------------------------------------------------------------------------

namespace detail {
inline int next_pnm_token(std::istream& is, std::string& tok) {
    tok.clear();
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {}
            continue;
        }
        if (!std::isspace(c)) break;
    }
    if (c == EOF) return -1;
    do {
        tok.push_back(static_cast<char>(c));
        c = is.get();
    } while (c != EOF && !std::isspace(c));
    return 0;
}
} // namespace detail

inline GrayImage read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DecodeError("cannot open image: " + path);
    std::string tok;
    if (detail::next_pnm_token(is, tok) < 0 || (tok != "P5" && tok != "P2"))
        throw DecodeError("not a PGM file: " + path);
    const bool binary = tok == "P5";
    std::size_t dims[3];
    for (auto& d : dims) {
        if (detail::next_pnm_token(is, tok) < 0) throw DecodeError("truncated PGM header: " + path);
        try {
            d = std::stoul(tok);
        } catch (const std::exception&) {
            throw DecodeError("malformed PGM header: " + path);
        }
    }
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0 || dims[2] > 255)
        throw DecodeError("unsupported PGM geometry or depth: " + path);
    GrayImage img{dims[0], dims[1], {}};
    img.pixels.resize(img.width * img.height);
    if (binary) {
        is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
        if (static_cast<std::size_t>(is.gcount()) != img.pixels.size())
            throw DecodeError("truncated PGM pixel data: " + path);
    } else {
        for (auto& p : img.pixels) {
            if (detail::next_pnm_token(is, tok) < 0) throw DecodeError("truncated PGM pixel data: " + path);
            p = static_cast<std::uint8_t>(std::stoul(tok));
        }
    }
    return img;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw IoError("short write: " + path);
}

#ifdef SEDM_WITH_PNG
inline GrayImage read_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw DecodeError("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DecodeError("libpng init failed: " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DecodeError("corrupt or truncated PNG: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    GrayImage img{png_get_image_width(png, info), png_get_image_height(png, info), {}};
    img.pixels.resize(img.width * img.height);
    std::vector<png_bytep> rows(img.height);
    for (std::size_t r = 0; r < img.height; ++r) rows[r] = img.pixels.data() + r * img.width;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}
#endif

/// Dispatch on file extension. PGM always available; PNG when built with libpng.
inline GrayImage read_image(const std::string& path) {
    const auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
    if (ext == "pgm") return read_pgm(path);
#ifdef SEDM_WITH_PNG
    if (ext == "png") return read_png(path);
#endif
    throw DecodeError("unsupported image format: " + path);
}

inline bool is_supported_image(const std::string& filename) {
    const auto dot = filename.rfind('.');
    std::string ext = dot == std::string::npos ? "" : filename.substr(dot + 1);
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
    if (ext == "pgm") return true;
#ifdef SEDM_WITH_PNG
    if (ext == "png") return true;
#endif
    return false;
}

/// Keeps only the largest 4-connected foreground component.
/// Returns the number of components found (callers may warn when > 1).
inline std::size_t keep_largest_component(BinaryMask& mask) {
    const std::size_t h = mask.height, w = mask.width;
    std::vector<std::int32_t> label(h * w, -1);
    std::int32_t next = 0;
    std::size_t best_count = 0;
    std::int32_t best_label = -1;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < h * w; ++start) {
        if (!mask.pixels[start] || label[start] >= 0) continue;
        std::size_t count = 0;
        stack.push_back(start);
        label[start] = next;
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            ++count;
            const std::size_t r = idx / w, c = idx % w;
            const std::size_t nbr[4] = {idx - w, idx + w, idx - 1, idx + 1};
            const bool ok[4] = {r > 0, r + 1 < h, c > 0, c + 1 < w};
            for (int k = 0; k < 4; ++k) {
                if (ok[k] && mask.pixels[nbr[k]] && label[nbr[k]] < 0) {
                    label[nbr[k]] = next;
                    stack.push_back(nbr[k]);
                }
            }
        }
        if (count > best_count) {
            best_count = count;
            best_label = next;
        }
        ++next;
    }
    if (next > 1) {
        for (std::size_t i = 0; i < h * w; ++i) mask.pixels[i] = label[i] == best_label ? 1 : 0;
    }
    return static_cast<std::size_t>(next);
}

} // namespace sedm
