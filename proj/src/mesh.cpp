#include "parte/mesh.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "parte/error.hpp"

namespace parte {

namespace {

constexpr std::array<std::string_view, kLabelCount> kLabelNames = {
    "background", "face_hair", "upper_clothes", "lower_clothes", "footwear", "others"};

}  // namespace

PartLabel label_from_code(std::uint8_t code) {
    if (!is_valid_label_code(code)) {
        throw ValidationError("part label code " + std::to_string(code) + " outside 0..5");
    }
    return static_cast<PartLabel>(code);
}

std::string_view label_name(PartLabel l) { return kLabelNames[to_code(l)]; }

std::optional<PartLabel> label_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
        if (kLabelNames[i] == name) return static_cast<PartLabel>(i);
    }
    return std::nullopt;
}

Mesh Mesh::create(std::vector<Vec3> vertices, std::vector<Face> faces,
                  std::optional<std::vector<Vec3>> normals,
                  std::optional<std::vector<Vec3>> colors,
                  std::optional<std::vector<PartLabel>> labels) {
    const std::size_t n = vertices.size();
    if (n > std::numeric_limits<std::uint32_t>::max()) {
        throw ValidationError("too many vertices");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!vertices[i].allFinite()) {
            throw ValidationError("vertex " + std::to_string(i) + " has a non-finite coordinate");
        }
    }
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& face = faces[f];
        for (auto idx : face) {
            if (idx >= n) {
                throw ValidationError("face " + std::to_string(f) + " references vertex " +
                                      std::to_string(idx) + " of " + std::to_string(n));
            }
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            throw ValidationError("face " + std::to_string(f) + " is degenerate (repeated index)");
        }
    }
    if (normals) {
        if (normals->size() != n) throw ValidationError("normal count differs from vertex count");
        for (std::size_t i = 0; i < n; ++i) {
            const double len = (*normals)[i].norm();
            if (!(std::abs(len - 1.0) <= 1e-6)) {
                throw ValidationError("normal " + std::to_string(i) + " is not unit length");
            }
        }
    }
    if (colors) {
        if (colors->size() != n) throw ValidationError("color count differs from vertex count");
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3& c = (*colors)[i];
            if (!(c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0)) {
                throw ValidationError("color " + std::to_string(i) + " outside [0,1]");
            }
        }
    }
    if (labels) {
        if (labels->size() != n) throw ValidationError("label count differs from vertex count");
        for (auto l : *labels) {
            if (!is_valid_label_code(to_code(l))) throw ValidationError("label code outside 0..5");
        }
    }
    Mesh m;
    m.vertices_ = std::move(vertices);
    m.faces_ = std::move(faces);
    m.normals_ = std::move(normals);
    m.colors_ = std::move(colors);
    m.labels_ = std::move(labels);
    return m;
}

const std::vector<Vec3>& Mesh::normals() const {
    if (!normals_) throw ContractError("mesh has no vertex normals");
    return *normals_;
}

const std::vector<Vec3>& Mesh::colors() const {
    if (!colors_) throw ContractError("mesh has no vertex colors");
    return *colors_;
}

const std::vector<PartLabel>& Mesh::labels() const {
    if (!labels_) throw ContractError("mesh has no vertex labels");
    return *labels_;
}

Mesh Mesh::with_normals(std::vector<Vec3> normals) const {
    return create(vertices_, faces_, std::move(normals), colors_, labels_);
}

Mesh Mesh::with_colors(std::vector<Vec3> colors) const {
    return create(vertices_, faces_, normals_, std::move(colors), labels_);
}

Mesh Mesh::with_labels(std::vector<PartLabel> labels) const {
    return create(vertices_, faces_, normals_, colors_, std::move(labels));
}

std::pair<Vec3, Vec3> Mesh::bounds() const {
    if (vertices_.empty()) return {Vec3::Zero(), Vec3::Zero()};
    Vec3 lo = vertices_.front();
    Vec3 hi = vertices_.front();
    for (const Vec3& v : vertices_) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return {lo, hi};
}

double Mesh::face_area(std::size_t f) const {
    const Face& face = faces_[f];
    const Vec3& a = vertices_[face[0]];
    return 0.5 * (vertices_[face[1]] - a).cross(vertices_[face[2]] - a).norm();
}

Mesh compute_vertex_normals(const Mesh& mesh, NormalReport* report) {
    const auto& verts = mesh.vertices();
    std::vector<Vec3> accum(verts.size(), Vec3::Zero());
    // The unnormalized cross product is the face normal scaled by twice its area.
    for (const Face& f : mesh.faces()) {
        const Vec3 n = (verts[f[1]] - verts[f[0]]).cross(verts[f[2]] - verts[f[0]]);
        for (auto idx : f) accum[idx] += n;
    }
    std::vector<Vec3> normals(verts.size());
    if (report) report->flagged.clear();
    for (std::size_t i = 0; i < verts.size(); ++i) {
        const double len = accum[i].norm();
        if (len > 0.0 && std::isfinite(len)) {
            normals[i] = accum[i] / len;
        } else {
            normals[i] = Vec3(0, 0, 1);
            if (report) report->flagged.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return mesh.with_normals(std::move(normals));
}

std::optional<PartLabel> face_majority_label(const Mesh& mesh, std::size_t face) {
    const auto& labels = mesh.labels();
    const Face& f = mesh.faces()[face];
    const PartLabel a = labels[f[0]], b = labels[f[1]], c = labels[f[2]];
    if (a == b || a == c) return a;
    if (b == c) return b;
    return std::nullopt;
}

Mesh extract_part(const Mesh& mesh, PartLabel part) {
    if (!mesh.has_labels()) throw ContractError("extract_part requires vertex labels");
    constexpr auto kUnmapped = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> remap(mesh.vertex_count(), kUnmapped);
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::vector<Vec3> normals, colors;
    std::vector<PartLabel> labels;

    std::vector<std::size_t> kept;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        if (face_majority_label(mesh, f) != part) continue;
        kept.push_back(f);
        for (std::uint32_t v : mesh.faces()[f]) remap[v] = 0;
    }
    // New indices follow the original vertex order.
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        if (remap[v] == kUnmapped) continue;
        remap[v] = static_cast<std::uint32_t>(verts.size());
        verts.push_back(mesh.vertices()[v]);
        if (mesh.has_normals()) normals.push_back(mesh.normals()[v]);
        if (mesh.has_colors()) colors.push_back(mesh.colors()[v]);
        labels.push_back(mesh.labels()[v]);
    }
    for (std::size_t f : kept) {
        const Face& src = mesh.faces()[f];
        faces.push_back({remap[src[0]], remap[src[1]], remap[src[2]]});
    }

    std::optional<std::vector<Vec3>> n, c;
    if (mesh.has_normals()) n = std::move(normals);
    if (mesh.has_colors()) c = std::move(colors);
    return Mesh::create(std::move(verts), std::move(faces), std::move(n), std::move(c),
                        std::move(labels));
}

}  // namespace parte
