#include "parte/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "parte/error.hpp"

namespace parte::shapes {

Mesh unit_cube(double size) {
    std::vector<Vec3> verts;
    for (int i = 0; i < 8; ++i) {
        verts.emplace_back(((i & 1) ? 0.5 : -0.5) * size, ((i & 2) ? 0.5 : -0.5) * size,
                           ((i & 4) ? 0.5 : -0.5) * size);
    }
    auto parity = [](int i) { return ((i & 1) + ((i >> 1) & 1) + ((i >> 2) & 1)) % 2; };

    std::vector<Face> faces;
    for (int axis = 0; axis < 3; ++axis) {
        for (int side = 0; side < 2; ++side) {
            Vec3 normal = Vec3::Zero();
            normal[axis] = side ? 1.0 : -1.0;
            std::vector<int> quad;
            for (int i = 0; i < 8; ++i) {
                if (((i >> axis) & 1) == side) quad.push_back(i);
            }
            // Counter-clockwise around the outward normal.
            const Vec3 c = normal * 0.5 * size;
            const Vec3 u = Vec3::Unit((axis + 1) % 3);
            const Vec3 v = normal.cross(u);
            std::sort(quad.begin(), quad.end(), [&](int a, int b) {
                const Vec3 da = verts[a] - c, db = verts[b] - c;
                return std::atan2(da.dot(v), da.dot(u)) < std::atan2(db.dot(v), db.dot(u));
            });
            const int s = parity(quad[0]) == 0 ? 0 : 1;
            auto q = [&](int k) { return static_cast<std::uint32_t>(quad[(s + k) % 4]); };
            faces.push_back({q(0), q(1), q(2)});
            faces.push_back({q(0), q(2), q(3)});
        }
    }
    return Mesh::create(std::move(verts), std::move(faces));
}

Mesh icosphere(int subdivisions, double radius, const Vec3& center) {
    if (subdivisions < 0) throw ArgumentError("icosphere subdivisions must be >= 0");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& v : verts) v.normalize();
    std::vector<Face> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const auto idx = static_cast<std::uint32_t>(verts.size());
            verts.push_back((verts[a] + verts[b]).normalized());
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(faces.size() * 4);
        for (const Face& f : faces) {
            const auto ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    for (Vec3& v : verts) v = center + v * radius;
    return Mesh::create(std::move(verts), std::move(faces));
}

Mesh grid_cube(int cells, double size, std::vector<int>* cube_face_of_vertex) {
    if (cells < 1) throw ArgumentError("grid_cube needs at least one cell per side");
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    if (cube_face_of_vertex) cube_face_of_vertex->clear();
    const double h = 0.5 * size;
    for (int cf = 0; cf < 6; ++cf) {
        const int axis = cf / 2;
        const double sign = (cf % 2 == 0) ? 1.0 : -1.0;
        Vec3 normal = Vec3::Zero();
        normal[axis] = sign;
        const Vec3 u = Vec3::Unit((axis + 1) % 3);
        const Vec3 v = normal.cross(u);
        const auto base = static_cast<std::uint32_t>(verts.size());
        for (int j = 0; j <= cells; ++j) {
            for (int i = 0; i <= cells; ++i) {
                const double a = -h + size * i / cells;
                const double b = -h + size * j / cells;
                verts.push_back(normal * h + u * a + v * b);
                if (cube_face_of_vertex) cube_face_of_vertex->push_back(cf);
            }
        }
        auto at = [&](int i, int j) { return base + static_cast<std::uint32_t>(j * (cells + 1) + i); };
        for (int j = 0; j < cells; ++j) {
            for (int i = 0; i < cells; ++i) {
                faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
                faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
            }
        }
    }
    return Mesh::create(std::move(verts), std::move(faces));
}

Mesh plane_patch(int cells, double half_extent, double z) {
    if (cells < 1) throw ArgumentError("plane_patch needs at least one cell per side");
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    for (int j = 0; j <= cells; ++j) {
        for (int i = 0; i <= cells; ++i) {
            verts.emplace_back(-half_extent + 2.0 * half_extent * i / cells,
                               -half_extent + 2.0 * half_extent * j / cells, z);
        }
    }
    auto at = [&](int i, int j) { return static_cast<std::uint32_t>(j * (cells + 1) + i); };
    for (int j = 0; j < cells; ++j) {
        for (int i = 0; i < cells; ++i) {
            faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    }
    return Mesh::create(std::move(verts), std::move(faces));
}

}  // namespace parte::shapes
