#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "parte/mesh.hpp"

namespace parte {

struct ColorFieldConfig {
    int levels = 12;
    int base_resolution = 16;
    int max_resolution = 2048;
    int features_per_level = 2;
    int log2_table_size = 16;
    int hidden = 32;

    bool operator==(const ColorFieldConfig&) const = default;
};

/// Offsets of each parameter block inside the flat parameter vector:
/// [hash tables: level, entry, feature][W1: hidden x input, row-major][b1]
/// [W2: 3 x hidden, row-major][b2].
struct FieldLayout {
    std::size_t table_size = 0;
    std::size_t input_dim = 0;
    std::size_t tables = 0;
    std::size_t w1 = 0;
    std::size_t b1 = 0;
    std::size_t w2 = 0;
    std::size_t b2 = 0;
    std::size_t total = 0;

    static FieldLayout of(const ColorFieldConfig& cfg);
};

/// Grid resolution per level: geometric from base to max, last level exactly max.
/// Throws ArgumentError unless strictly increasing.
std::vector<int> level_resolutions(const ColorFieldConfig& cfg);

struct EvalStats {
    std::size_t points = 0;
    std::size_t clamped = 0;  ///< points with a coordinate outside [0,1]
};

/// Lower bound applied to the logistic slope in the backward pass.
inline constexpr double kSquashSlopeFloor = 1e-4;

/// Multiresolution hash encoding followed by a one-hidden-layer ReLU MLP and
/// a logistic squash, mapping points of [0,1]^3 to RGB in [0,1].
class ColorField {
public:
    ColorField() = default;

    /// Hash features uniform in [-1e-4, 1e-4], W1 He-uniform by fan-in,
    /// zero biases and zero output layer (so every point starts at gray 0.5).
    static ColorField initialize(const ColorFieldConfig& cfg, std::uint64_t seed);
    /// All parameters zero.
    static ColorField zeros(const ColorFieldConfig& cfg);

    const ColorFieldConfig& config() const { return cfg_; }
    const FieldLayout& layout() const { return layout_; }
    const std::vector<int>& resolutions() const { return resolutions_; }
    std::size_t param_count() const { return params_.size(); }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    Vec3 eval(const Vec3& point, EvalStats* stats = nullptr) const;
    std::vector<Vec3> eval(std::span<const Vec3> points, EvalStats* stats = nullptr) const;

    /// Adds d(sum_i upstream_i . rgb_i)/d(params) into `grad` (size
    /// param_count). Writes the forward colors to `rgb_out` when given.
    /// Throws ContractError on size mismatch or non-finite upstream.
    void eval_with_grad(std::span<const Vec3> points, std::span<const Vec3> upstream, std::span<double> grad,
                        std::vector<Vec3>* rgb_out = nullptr, EvalStats* stats = nullptr) const;

    bool operator==(const ColorField& o) const { return cfg_ == o.cfg_ && params_ == o.params_; }

    /// Spatial hash (or dense index when the level grid fits the table).
    std::uint32_t table_index(int level, std::uint32_t x, std::uint32_t y, std::uint32_t z) const;

private:
    struct Corners;
    void encode(const Vec3& p, std::vector<double>& features, std::vector<Corners>* corners, EvalStats* stats) const;

    ColorFieldConfig cfg_;
    FieldLayout layout_;
    std::vector<int> resolutions_;
    std::vector<double> params_;
};

/// Isotropic map of the mesh bounding box into [0.05, 0.95]^3.
class PointNormalizer {
public:
    PointNormalizer() = default;
    explicit PointNormalizer(const Mesh& mesh);
    PointNormalizer(const Vec3& center, double scale) : center_(center), scale_(scale) {}

    Vec3 operator()(const Vec3& p) const { return Vec3::Constant(0.5) + (p - center_) * scale_; }
    const Vec3& center() const { return center_; }
    double scale() const { return scale_; }

private:
    Vec3 center_ = Vec3::Zero();
    double scale_ = 1.0;
};

/// Field checkpoint container, all little-endian:
///   "PRTFIELD" | u32 version=1 | u32 scalar_bits (32 or 64)
///   | u32 levels, base_resolution, max_resolution, features_per_level,
///         log2_table_size, hidden
///   | u64 step | u64 param_count | param_count scalars
std::string save_field(const ColorField& field, std::uint64_t step = 0, int scalar_bits = 32);

struct LoadedField {
    ColorField field;
    std::uint64_t step = 0;
};
LoadedField load_field(std::string_view bytes);

}  // namespace parte
