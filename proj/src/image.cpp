#include "parte/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "parte/error.hpp"

namespace parte {

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ContractError(std::string(what) + ": image shapes differ (" + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                            std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                            std::to_string(b.channels) + ")");
    }
}

Image resample_nearest(const Image& img, int width, int height) {
    if (img.width == width && img.height == height) return img;
    Image out(width, height, img.channels);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(img.height - 1, static_cast<int>((y + 0.5) * img.height / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(img.width - 1, static_cast<int>((x + 0.5) * img.width / width));
            for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
        }
    }
    return out;
}

std::string read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_binary_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

namespace {

struct PngRaw {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

void png_write_to_string(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), len);
}

void png_flush_noop(png_structp) {}

struct ReadCursor {
    std::string_view bytes;
    std::size_t pos = 0;
};

void png_read_from_view(png_structp png, png_bytep data, png_size_t len) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->bytes.size() - cur->pos < len) png_error(png, "truncated PNG");
    std::memcpy(data, cur->bytes.data() + cur->pos, len);
    cur->pos += len;
}

[[noreturn]] void png_throw(png_structp, png_const_charp msg) {
    throw FormatError(std::string("PNG: ") + msg, FormatError::Unit::byte, 0);
}

void png_warn(png_structp, png_const_charp) {}

std::string encode_raw(const PngRaw& raw) {
    int color_type = PNG_COLOR_TYPE_GRAY;
    if (raw.channels == 3) color_type = PNG_COLOR_TYPE_RGB;
    else if (raw.channels == 4) color_type = PNG_COLOR_TYPE_RGBA;
    else if (raw.channels != 1) throw ContractError("PNG encode supports 1, 3 or 4 channels");
    if (raw.width < 1 || raw.height < 1) throw ContractError("PNG encode needs a non-empty image");

    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    try {
        png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
        png_set_IHDR(png, info, raw.width, raw.height, 8, color_type, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(raw.width) * raw.channels;
        for (int y = 0; y < raw.height; ++y) {
            png_write_row(png, const_cast<png_bytep>(raw.pixels.data() + y * stride));
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

PngRaw decode_raw(std::string_view bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        throw FormatError("not a PNG stream", FormatError::Unit::byte, 0);
    }
    ReadCursor cur{bytes, 0};
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    PngRaw raw;
    try {
        png_set_read_fn(png, &cur, png_read_from_view);
        png_read_info(png, info);
        const int color_type = png_get_color_type(png, info);
        const int depth = png_get_bit_depth(png, info);
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        if (depth == 16) png_set_strip_16(png);
        if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
        png_read_update_info(png, info);
        raw.width = static_cast<int>(png_get_image_width(png, info));
        raw.height = static_cast<int>(png_get_image_height(png, info));
        raw.channels = png_get_channels(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        raw.pixels.resize(stride * raw.height);
        for (int y = 0; y < raw.height; ++y) png_read_row(png, raw.pixels.data() + y * stride, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

}  // namespace

std::string encode_png(const Image& img) {
    PngRaw raw{img.width, img.height, img.channels, {}};
    raw.pixels.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::isfinite(img.data[i]) ? std::clamp(img.data[i], 0.0, 1.0) : 0.0;
        raw.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return encode_raw(raw);
}

Image decode_png(std::string_view bytes) {
    const PngRaw raw = decode_raw(bytes);
    Image img(raw.width, raw.height, raw.channels);
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) img.data[i] = raw.pixels[i] / 255.0;
    return img;
}

std::string encode_label_png(const LabelMap& labels) {
    PngRaw raw{labels.width, labels.height, 1, labels.codes};
    return encode_raw(raw);
}

LabelMap decode_label_png(std::string_view bytes) {
    PngRaw raw = decode_raw(bytes);
    if (raw.channels != 1) throw ValidationError("label map PNG must be single-channel");
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
        if (!is_valid_label_code(raw.pixels[i])) {
            throw ValidationError("label map pixel " + std::to_string(i) + " has code " +
                                  std::to_string(raw.pixels[i]) + " outside 0..5");
        }
    }
    LabelMap out;
    out.width = raw.width;
    out.height = raw.height;
    out.codes = std::move(raw.pixels);
    return out;
}

void write_png(const Image& img, const std::filesystem::path& path) { write_binary_file(path, encode_png(img)); }
Image read_png(const std::filesystem::path& path) { return decode_png(read_binary_file(path)); }
void write_label_png(const LabelMap& labels, const std::filesystem::path& path) {
    write_binary_file(path, encode_label_png(labels));
}
LabelMap read_label_png(const std::filesystem::path& path) { return decode_label_png(read_binary_file(path)); }

namespace {

constexpr char kDepthMagic[8] = {'P', 'R', 'T', 'D', 'E', 'P', 'T', 'H'};

template <typename T>
void put_le(std::string& out, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t pos) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

std::string encode_depth(std::span<const double> depth, int width, int height) {
    if (depth.size() != static_cast<std::size_t>(width) * height) throw ContractError("depth size mismatch");
    std::string out(kDepthMagic, sizeof(kDepthMagic));
    put_le(out, static_cast<std::uint32_t>(width));
    put_le(out, static_cast<std::uint32_t>(height));
    for (double d : depth) put_le(out, static_cast<float>(d));
    return out;
}

std::vector<double> decode_depth(std::string_view bytes, int& width, int& height) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kDepthMagic, 8) != 0) {
        throw FormatError("missing PRTDEPTH magic", FormatError::Unit::byte, 0);
    }
    const auto w = get_le<std::uint32_t>(bytes, 8);
    const auto h = get_le<std::uint32_t>(bytes, 12);
    const std::uint64_t n = static_cast<std::uint64_t>(w) * h;
    if (bytes.size() - 16 != n * 4) throw FormatError("depth payload size mismatch", FormatError::Unit::byte, 16);
    std::vector<double> out(n);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = get_le<float>(bytes, 16 + i * 4);
    width = static_cast<int>(w);
    height = static_cast<int>(h);
    return out;
}

}  // namespace parte
