#include "parte/raster.hpp"

#include <algorithm>
#include <cmath>

#include "parte/error.hpp"

namespace parte {

ScreenPoint project(const Viewpoint& view, const Vec3& p) {
    const Vec3 cam = view.rotation.transpose() * (p - view.frame.center);
    const double h = view.frame.half_extent;
    const double res = view.resolution;
    return {(cam.x() / h + 1.0) * 0.5 * res, (1.0 - cam.y() / h) * 0.5 * res,
            kEyeDistanceFactor * h - cam.z()};
}

Vec3 pixel_ray_origin(const Viewpoint& view, int px, int py) {
    const double h = view.frame.half_extent;
    const double res = view.resolution;
    const double cx = ((px + 0.5) / res * 2.0 - 1.0) * h;
    const double cy = (1.0 - (py + 0.5) / res * 2.0) * h;
    return view.frame.center + view.rotation * Vec3(cx, cy, kEyeDistanceFactor * h);
}

RenderBuffers rasterize(const Mesh& mesh, const Viewpoint& view) {
    if (view.resolution < 16) throw ContractError("rasterize needs resolution >= 16");
    if (!mesh.has_normals() && mesh.vertex_count() > 0) throw ContractError("rasterize needs vertex normals");

    const int res = view.resolution;
    const std::size_t npix = static_cast<std::size_t>(res) * res;
    RenderBuffers buf;
    buf.width = res;
    buf.height = res;
    buf.normal_map = Image(res, res, 3, 0.0);
    buf.depth.assign(npix, std::numeric_limits<double>::infinity());
    buf.face_id.assign(npix, kNoFace);
    buf.barycentric.assign(npix, {0.0, 0.0, 0.0});
    buf.mask.assign(npix, 0);

    std::vector<ScreenPoint> screen(mesh.vertex_count());
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) screen[i] = project(view, mesh.vertices()[i]);

    const auto& faces = mesh.faces();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const ScreenPoint& a = screen[faces[f][0]];
        const ScreenPoint& b = screen[faces[f][1]];
        const ScreenPoint& c = screen[faces[f][2]];
        const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if (area == 0.0 || !std::isfinite(area)) continue;

        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
        const int x1 = std::min(res - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
        const int y1 = std::min(res - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));

        for (int py = y0; py <= y1; ++py) {
            const double sy = py + 0.5;
            for (int px = x0; px <= x1; ++px) {
                const double sx = px + 0.5;
                // Edge functions opposite each vertex; all share the sign of `area` inside.
                const double w0 = (b.x - sx) * (c.y - sy) - (b.y - sy) * (c.x - sx);
                const double w1 = (c.x - sx) * (a.y - sy) - (c.y - sy) * (a.x - sx);
                const double w2 = (a.x - sx) * (b.y - sy) - (a.y - sy) * (b.x - sx);
                const bool inside = area > 0 ? (w0 >= 0 && w1 >= 0 && w2 >= 0)
                                             : (w0 <= 0 && w1 <= 0 && w2 <= 0);
                if (!inside) continue;
                const double l0 = w0 / area, l1 = w1 / area;
                const double l2 = 1.0 - l0 - l1;
                const double z = l0 * a.depth + l1 * b.depth + l2 * c.depth;
                const std::size_t p = static_cast<std::size_t>(py) * res + px;
                if (!(z < buf.depth[p])) continue;
                buf.depth[p] = z;
                buf.face_id[p] = static_cast<std::uint32_t>(f);
                buf.barycentric[p] = {l0, l1, std::max(0.0, l2)};
                buf.mask[p] = 1;
            }
        }
    }

    for (std::size_t p = 0; p < npix; ++p) {
        if (!buf.mask[p]) continue;
        const Face& face = faces[buf.face_id[p]];
        const auto& w = buf.barycentric[p];
        Vec3 n = w[0] * mesh.normals()[face[0]] + w[1] * mesh.normals()[face[1]] + w[2] * mesh.normals()[face[2]];
        const double len = n.norm();
        n = len > 0.0 ? Vec3(n / len) : Vec3(view.direction());
        const Vec3 rgb = encode_normal(n);
        for (int c = 0; c < 3; ++c) buf.normal_map.data[p * 3 + c] = rgb[c];
    }
    return buf;
}

std::vector<Vec3> surface_points(const Mesh& mesh, const RenderBuffers& buffers) {
    std::vector<Vec3> pts(buffers.pixel_count(), Vec3::Zero());
    for (std::size_t p = 0; p < pts.size(); ++p) {
        if (!buffers.mask[p]) continue;
        const Face& f = mesh.faces()[buffers.face_id[p]];
        const auto& w = buffers.barycentric[p];
        pts[p] = w[0] * mesh.vertices()[f[0]] + w[1] * mesh.vertices()[f[1]] + w[2] * mesh.vertices()[f[2]];
    }
    return pts;
}

int dominant_corner(const std::array<double, 3>& bary) {
    int best = 0;
    if (bary[1] > bary[best]) best = 1;
    if (bary[2] > bary[best]) best = 2;
    return best;
}

std::uint32_t dominant_vertex(const Mesh& mesh, const RenderBuffers& buffers, std::size_t p) {
    return mesh.faces()[buffers.face_id[p]][dominant_corner(buffers.barycentric[p])];
}

LabelMap labels_from_buffers(const Mesh& mesh, const RenderBuffers& buffers) {
    const auto& labels = mesh.labels();
    LabelMap out(buffers.width, buffers.height);
    for (std::size_t p = 0; p < buffers.pixel_count(); ++p) {
        if (buffers.mask[p]) out.codes[p] = to_code(labels[dominant_vertex(mesh, buffers, p)]);
    }
    return out;
}

LabelMap render_labels(const Mesh& mesh, const Viewpoint& view) {
    if (!mesh.has_labels()) throw ContractError("render_labels needs vertex labels");
    return labels_from_buffers(mesh, rasterize(mesh, view));
}

ColorRender render_colors(const Mesh& mesh, const std::vector<Vec3>& colors, const Viewpoint& view,
                          const Vec3& background) {
    if (colors.size() != mesh.vertex_count()) throw ContractError("render_colors: one color per vertex required");
    for (const Vec3& c : colors) {
        if (!(c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0)) throw ContractError("render_colors: colors must lie in [0,1]");
    }
    ColorRender out;
    out.buffers = rasterize(mesh, view);
    const int res = out.buffers.width;
    out.image = Image(res, res, 3);
    for (std::size_t p = 0; p < out.buffers.pixel_count(); ++p) {
        Vec3 rgb = background;
        if (out.buffers.mask[p]) {
            const Face& f = mesh.faces()[out.buffers.face_id[p]];
            const auto& w = out.buffers.barycentric[p];
            rgb = w[0] * colors[f[0]] + w[1] * colors[f[1]] + w[2] * colors[f[2]];
        }
        for (int c = 0; c < 3; ++c) out.image.data[p * 3 + c] = rgb[c];
    }
    return out;
}

std::vector<Vec3> backprop_vertex_colors(const Mesh& mesh, const RenderBuffers& buffers, const Image& pixel_grad) {
    if (pixel_grad.width != buffers.width || pixel_grad.height != buffers.height || pixel_grad.channels != 3) {
        throw ContractError("backprop_vertex_colors: gradient shape differs from buffers");
    }
    std::vector<Vec3> grad(mesh.vertex_count(), Vec3::Zero());
    for (std::size_t p = 0; p < buffers.pixel_count(); ++p) {
        if (!buffers.mask[p]) continue;
        const Face& f = mesh.faces()[buffers.face_id[p]];
        const Vec3 g(pixel_grad.data[p * 3], pixel_grad.data[p * 3 + 1], pixel_grad.data[p * 3 + 2]);
        for (int k = 0; k < 3; ++k) grad[f[k]] += buffers.barycentric[p][k] * g;
    }
    return grad;
}

Vec3 encode_normal(const Vec3& n) { return (n + Vec3::Ones()) * 0.5; }
Vec3 decode_normal(const Vec3& rgb) { return rgb * 2.0 - Vec3::Ones(); }

}  // namespace parte
