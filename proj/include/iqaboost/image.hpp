#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iqaboost/errors.hpp"

namespace iqaboost {

// Row-major grayscale raster with real-valued samples in [0, dynamic_range].
class GrayImage {
public:
    GrayImage(int width, int height, std::vector<double> samples, double dynamic_range = 255.0);

    static GrayImage constant(int width, int height, double value, double dynamic_range = 255.0);

    int width() const { return width_; }
    int height() const { return height_; }
    double dynamic_range() const { return dynamic_range_; }
    const std::vector<double>& samples() const { return samples_; }

    double at(int row, int col) const { return samples_[static_cast<std::size_t>(row) * width_ + col]; }
    double& at(int row, int col) { return samples_[static_cast<std::size_t>(row) * width_ + col]; }

private:
    int width_;
    int height_;
    double dynamic_range_;
    std::vector<double> samples_;
};

// 8-bit interleaved pixel buffer as decoded from disk; channels is 1 or 3.
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

// Decodes 8-bit grayscale or RGB from PNG and binary PGM/PPM (P5/P6).
// Any other format or sample depth is rejected with ParseError.
RawImage load_raw_image(const std::string& path);

// ITU-R BT.601 luma: Y = 0.299 R + 0.587 G + 0.114 B. Grayscale passes through.
GrayImage to_gray(const RawImage& raw);

GrayImage load_gray_image(const std::string& path);

// Writers used by the score pipeline's tests and for generating fixtures.
void write_pgm(const RawImage& raw, const std::string& path);
void write_png(const RawImage& raw, const std::string& path);

}  // namespace iqaboost
