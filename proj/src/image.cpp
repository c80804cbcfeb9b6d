#include "iqaboost/image.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace iqaboost {

GrayImage::GrayImage(int width, int height, std::vector<double> samples, double dynamic_range)
    : width_(width), height_(height), dynamic_range_(dynamic_range), samples_(std::move(samples)) {
    if (width_ < 1 || height_ < 1) {
        throw ShapeError("image dimensions must be at least 1x1");
    }
    if (samples_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
        throw ShapeError("sample count does not match width*height");
    }
    for (double v : samples_) {
        if (!(v >= 0.0 && v <= dynamic_range_)) {
            throw NumericError("image sample outside [0, L]");
        }
    }
}

GrayImage GrayImage::constant(int width, int height, double value, double dynamic_range) {
    return GrayImage(width, height,
                     std::vector<double>(static_cast<std::size_t>(width) * height, value),
                     dynamic_range);
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

int pnm_next_value(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comments between header tokens.
    while (true) {
        int c = in.peek();
        if (c == EOF) throw ParseError(path + ": truncated PNM header");
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    in >> value;
    if (!in) throw ParseError(path + ": malformed PNM header");
    return value;
}

RawImage load_pnm(const std::string& path, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image '" + path + "'");
    char magic[2];
    in.read(magic, 2);
    RawImage raw;
    raw.channels = channels;
    raw.width = pnm_next_value(in, path);
    raw.height = pnm_next_value(in, path);
    const int maxval = pnm_next_value(in, path);
    if (raw.width < 1 || raw.height < 1) throw ParseError(path + ": bad PNM dimensions");
    if (maxval < 1 || maxval > 255) {
        throw ParseError(path + ": only 8-bit PNM supported (maxval <= 255)");
    }
    in.get();  // single whitespace after maxval
    const std::size_t count =
        static_cast<std::size_t>(raw.width) * raw.height * static_cast<std::size_t>(channels);
    raw.pixels.resize(count);
    in.read(reinterpret_cast<char*>(raw.pixels.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) {
        throw ParseError(path + ": truncated PNM pixel data");
    }
    return raw;
}

RawImage load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open image '" + path + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng init failed");
    }
    RawImage raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path + ": PNG decode failed");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth != 8 || (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path + ": only 8-bit grayscale or RGB PNG supported");
    }
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.channels = (color_type == PNG_COLOR_TYPE_GRAY) ? 1 : 3;

    const std::size_t stride = static_cast<std::size_t>(raw.width) * raw.channels;
    raw.pixels.resize(stride * raw.height);
    rows.resize(raw.height);
    for (int r = 0; r < raw.height; ++r) {
        rows[static_cast<std::size_t>(r)] = raw.pixels.data() + stride * static_cast<std::size_t>(r);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

}  // namespace

RawImage load_raw_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open image '" + path + "'");
    char magic[8] = {};
    probe.read(magic, 8);
    probe.close();

    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (std::equal(std::begin(png_sig), std::end(png_sig), reinterpret_cast<unsigned char*>(magic))) {
        return load_png(path);
    }
    if (magic[0] == 'P' && magic[1] == '5') return load_pnm(path, 1);
    if (magic[0] == 'P' && magic[1] == '6') return load_pnm(path, 3);
    throw ParseError(path + ": unsupported image format (PNG, PGM, PPM only)");
}

GrayImage to_gray(const RawImage& raw) {
    if (raw.channels != 1 && raw.channels != 3) {
        throw ShapeError("raw image must have 1 or 3 channels");
    }
    const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
    std::vector<double> samples(n);
    if (raw.channels == 1) {
        for (std::size_t i = 0; i < n; ++i) samples[i] = raw.pixels[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double r = raw.pixels[3 * i];
            const double g = raw.pixels[3 * i + 1];
            const double b = raw.pixels[3 * i + 2];
            samples[i] = 0.299 * r + 0.587 * g + 0.114 * b;
        }
    }
    return GrayImage(raw.width, raw.height, std::move(samples));
}

GrayImage load_gray_image(const std::string& path) { return to_gray(load_raw_image(path)); }

void write_pgm(const RawImage& raw, const std::string& path) {
    if (raw.channels != 1 && raw.channels != 3) {
        throw ShapeError("raw image must have 1 or 3 channels");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image '" + path + "'");
    out << (raw.channels == 1 ? "P5" : "P6") << "\n"
        << raw.width << " " << raw.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(raw.pixels.data()),
              static_cast<std::streamsize>(raw.pixels.size()));
}

void write_png(const RawImage& raw, const std::string& path) {
    if (raw.channels != 1 && raw.channels != 3) {
        throw ShapeError("raw image must have 1 or 3 channels");
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write image '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path + ": PNG encode failed");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(raw.width), static_cast<png_uint_32>(raw.height),
                 8, raw.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(raw.width) * raw.channels;
    for (int r = 0; r < raw.height; ++r) {
        png_write_row(png, const_cast<png_bytep>(raw.pixels.data() + stride * static_cast<std::size_t>(r)));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace iqaboost
