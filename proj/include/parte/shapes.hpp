#pragma once

#include "parte/mesh.hpp"

namespace parte::shapes {

/// Axis-aligned cube of side `size` centered at the origin: 8 vertices, 12
/// outward-facing triangles. Each quad is split along the diagonal joining
/// its even-parity corners so every corner sees its three faces with equal
/// area weight.
Mesh unit_cube(double size = 1.0);

/// Subdivided icosahedron projected onto a sphere. Level 0 has 12 vertices;
/// each level quadruples the faces (level 4: 2562 vertices).
Mesh icosphere(int subdivisions, double radius = 1.0, const Vec3& center = Vec3::Zero());

/// Cube whose six faces are separate (unwelded) `cells` x `cells` grids.
/// `cube_face_of_vertex`, when given, receives the face index 0..5 in the
/// order +x, -x, +y, -y, +z, -z.
Mesh grid_cube(int cells, double size, std::vector<int>* cube_face_of_vertex = nullptr);

/// Axis-aligned rectangle in the plane z = `z`, facing +z, tessellated into
/// `cells` x `cells` quads.
Mesh plane_patch(int cells, double half_extent, double z = 0.0);

}  // namespace parte::shapes
