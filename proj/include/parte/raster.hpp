#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "parte/image.hpp"
#include "parte/mesh.hpp"
#include "parte/viewsphere.hpp"

namespace parte {

inline constexpr std::uint32_t kNoFace = std::numeric_limits<std::uint32_t>::max();

/// Everything a z-buffered pass records per pixel. Foreground pixels have a
/// face id, finite depth and barycentric weights summing to one; background
/// pixels have kNoFace, +inf depth and zero weights.
struct RenderBuffers {
    int width = 0;
    int height = 0;
    Image normal_map;                              ///< (n+1)/2 per channel, 0 on background
    std::vector<double> depth;                     ///< distance from the eye plane
    std::vector<std::uint32_t> face_id;
    std::vector<std::array<double, 3>> barycentric;
    std::vector<std::uint8_t> mask;

    std::size_t pixel_count() const { return face_id.size(); }
    bool foreground(std::size_t p) const { return mask[p] != 0; }
};

/// Depth is measured from an eye plane 2 x half-extent in front of the
/// frame center along the view direction.
inline constexpr double kEyeDistanceFactor = 2.0;

struct ScreenPoint {
    double x;      ///< pixel units, 0 at the left edge
    double y;      ///< pixel units, 0 at the top edge
    double depth;
};

/// World point to continuous pixel coordinates. Pixel (i, j) has its
/// center at (i + 0.5, j + 0.5).
ScreenPoint project(const Viewpoint& view, const Vec3& p);

/// World point on the eye plane under pixel center (px, py), and the ray
/// direction (-view direction).
Vec3 pixel_ray_origin(const Viewpoint& view, int px, int py);

/// Orthographic z-buffer pass. A pixel is covered when its center lies inside
/// (or on the edge of) a triangle of either winding; the nearest wins and
/// equal depths keep the lower face index. Requires vertex normals and a
/// resolution of at least 16 (ContractError).
RenderBuffers rasterize(const Mesh& mesh, const Viewpoint& view);

/// Surface position under each foreground pixel (zero on background).
std::vector<Vec3> surface_points(const Mesh& mesh, const RenderBuffers& buffers);

/// Index (0..2) of the largest barycentric weight; ties keep the lower slot.
int dominant_corner(const std::array<double, 3>& bary);

/// Vertex nearest (by barycentric weight) to the visible surface at pixel p.
std::uint32_t dominant_vertex(const Mesh& mesh, const RenderBuffers& buffers, std::size_t p);

/// Per-pixel label of the dominant vertex, background elsewhere.
LabelMap labels_from_buffers(const Mesh& mesh, const RenderBuffers& buffers);

/// rasterize + labels_from_buffers. Requires vertex labels.
LabelMap render_labels(const Mesh& mesh, const Viewpoint& view);

/// Color render plus the buffers that define its sensitivity: each
/// foreground pixel is sum_k bary[k] * color[face[k]], so the derivative of
/// that pixel with respect to the color of vertex face[k] is bary[k].
struct ColorRender {
    Image image;
    RenderBuffers buffers;
};

inline const Vec3 kWhite{1.0, 1.0, 1.0};

ColorRender render_colors(const Mesh& mesh, const std::vector<Vec3>& colors, const Viewpoint& view,
                          const Vec3& background = kWhite);

/// Chain rule through render_colors: per-vertex color gradient from a
/// per-pixel RGB gradient (same layout as the rendered image).
std::vector<Vec3> backprop_vertex_colors(const Mesh& mesh, const RenderBuffers& buffers,
                                         const Image& pixel_grad);

Vec3 encode_normal(const Vec3& n);
Vec3 decode_normal(const Vec3& rgb);

}  // namespace parte
