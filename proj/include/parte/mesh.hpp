#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace parte {

using Vec3 = Eigen::Vector3d;
using Face = std::array<std::uint32_t, 3>;

/// Semantic human part. Stored on disk as an 8-bit code.
enum class PartLabel : std::uint8_t {
    background = 0,
    face_hair = 1,
    upper_clothes = 2,
    lower_clothes = 3,
    footwear = 4,
    others = 5,
};

inline constexpr int kLabelCount = 6;
inline constexpr int kForegroundLabelCount = 5;

inline constexpr std::array<PartLabel, kForegroundLabelCount> kForegroundLabels = {
    PartLabel::face_hair, PartLabel::upper_clothes, PartLabel::lower_clothes,
    PartLabel::footwear, PartLabel::others};

constexpr std::uint8_t to_code(PartLabel l) { return static_cast<std::uint8_t>(l); }
constexpr bool is_valid_label_code(std::uint8_t c) { return c < kLabelCount; }

/// Throws ValidationError for codes outside 0..5.
PartLabel label_from_code(std::uint8_t code);

std::string_view label_name(PartLabel l);
std::optional<PartLabel> label_from_name(std::string_view name);

/// Indexed triangle surface in centimeters. Immutable once built; every
/// constructor path validates, so a Mesh in hand always satisfies its
/// invariants.
class Mesh {
public:
    Mesh() = default;

    /// Validates and takes ownership. Throws ValidationError.
    static Mesh create(std::vector<Vec3> vertices, std::vector<Face> faces,
                       std::optional<std::vector<Vec3>> normals = std::nullopt,
                       std::optional<std::vector<Vec3>> colors = std::nullopt,
                       std::optional<std::vector<PartLabel>> labels = std::nullopt);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Face>& faces() const { return faces_; }
    std::size_t vertex_count() const { return vertices_.size(); }
    std::size_t face_count() const { return faces_.size(); }
    bool empty() const { return faces_.empty() && vertices_.empty(); }

    bool has_normals() const { return normals_.has_value(); }
    bool has_colors() const { return colors_.has_value(); }
    bool has_labels() const { return labels_.has_value(); }

    /// Throw ContractError when the attribute is absent.
    const std::vector<Vec3>& normals() const;
    const std::vector<Vec3>& colors() const;
    const std::vector<PartLabel>& labels() const;

    Mesh with_normals(std::vector<Vec3> normals) const;
    Mesh with_colors(std::vector<Vec3> colors) const;
    Mesh with_labels(std::vector<PartLabel> labels) const;

    /// Axis-aligned bounds; both zero for an empty mesh.
    std::pair<Vec3, Vec3> bounds() const;

    double face_area(std::size_t f) const;

private:
    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::optional<std::vector<Vec3>> normals_;
    std::optional<std::vector<Vec3>> colors_;
    std::optional<std::vector<PartLabel>> labels_;
};

struct NormalReport {
    /// Vertices whose incident faces all have zero area; their normal is +z.
    std::vector<std::uint32_t> flagged;
};

/// Area-weighted vertex normals. Isolated or zero-area-star vertices get
/// (0,0,1) and are listed in `report` when given.
Mesh compute_vertex_normals(const Mesh& mesh, NormalReport* report = nullptr);

/// Label of a face by majority of its vertex labels; nullopt when all three differ.
std::optional<PartLabel> face_majority_label(const Mesh& mesh, std::size_t face);

/// Submesh of the faces whose majority label is `part`, compactly re-indexed.
/// Faces with three distinct labels belong to no part. An absent part yields
/// an empty mesh.
Mesh extract_part(const Mesh& mesh, PartLabel part);

// I/O --------------------------------------------------------------------

enum class PlyEncoding { ascii, binary_little_endian };

/// OBJ (v/f records) or PLY (ascii, binary little/big endian), chosen by
/// extension. Throws FormatError / ValidationError / IoError.
Mesh load_mesh(const std::filesystem::path& path);

Mesh parse_obj(std::string_view text);
Mesh parse_ply(std::string_view bytes);

/// OBJ output carries positions and faces only.
void save_obj(const Mesh& mesh, const std::filesystem::path& path);
std::string serialize_ply(const Mesh& mesh, PlyEncoding encoding = PlyEncoding::binary_little_endian);
void save_ply(const Mesh& mesh, const std::filesystem::path& path,
              PlyEncoding encoding = PlyEncoding::binary_little_endian);
/// Dispatches on extension.
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace parte
