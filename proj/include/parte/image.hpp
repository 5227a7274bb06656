#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "parte/mesh.hpp"

namespace parte {

/// Dense row-major float image, channels interleaved. Row 0 is the top.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

/// Per-pixel part codes, row-major.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> codes;

    LabelMap() = default;
    LabelMap(int w, int h, PartLabel fill = PartLabel::background)
        : width(w), height(h), codes(static_cast<std::size_t>(w) * h, to_code(fill)) {}

    std::size_t pixel_count() const { return codes.size(); }
    std::uint8_t at(int x, int y) const { return codes[static_cast<std::size_t>(y) * width + x]; }
};

/// Throws ContractError unless the two images share a shape.
void require_same_shape(const Image& a, const Image& b, const char* what);

/// Nearest-neighbor resample.
Image resample_nearest(const Image& img, int width, int height);

// PNG ---------------------------------------------------------------------

/// 8-bit PNG encode. Channels 1 (gray), 3 (RGB) or 4 (RGBA); values clamped to
/// [0,1] and rounded to the nearest code.
std::string encode_png(const Image& img);
/// Decodes to [0,1] doubles. Gray and palette images are expanded; 16-bit is
/// reduced to 8-bit. `channels` keeps the decoded layout (1, 3 or 4).
Image decode_png(std::string_view bytes);

/// Label maps are 8-bit single-channel PNGs holding codes 0..5.
std::string encode_label_png(const LabelMap& labels);
/// Throws ValidationError on codes above 5 or non-gray images.
LabelMap decode_label_png(std::string_view bytes);

void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);
void write_label_png(const LabelMap& labels, const std::filesystem::path& path);
LabelMap read_label_png(const std::filesystem::path& path);

// Depth -------------------------------------------------------------------

/// Depth file: 8-byte magic "PRTDEPTH", uint32 width, uint32 height, then
/// width*height float32 values, all little-endian, row-major, +inf for
/// background.
std::string encode_depth(std::span<const double> depth, int width, int height);
std::vector<double> decode_depth(std::string_view bytes, int& width, int& height);

std::string read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace parte
