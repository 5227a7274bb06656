#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "parte/mesh.hpp"
#include "parte/partvote.hpp"

namespace parte::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Directory holding the checked-in test fixtures.
std::filesystem::path data_dir();

/// Two-label paint split by the plane y = 0.137 (no icosphere vertex lies on it).
PartLabel hemisphere_paint(const Vec3& p);

/// Icosphere (2562 vertices) with no attributes, and the same with paint labels.
Mesh sphere_fixture();
Mesh painted_sphere();

/// Label of a cube face index (+x, -x, +y, -y, +z, -z): five foreground
/// labels across six faces, so -z repeats the first.
PartLabel cube_face_paint(int cube_face);
/// Cube face index from an outward normal.
int cube_face_of_normal(const Vec3& n);

/// Grid cube with the per-vertex paint labels returned through `paint`.
Mesh painted_cube(std::vector<PartLabel>* paint, int cells = 12);

/// Labels each foreground pixel by the hemisphere paint of its surface point.
FunctionLabelProvider sphere_paint_provider(const Mesh& mesh);
/// Labels each foreground pixel by the cube face of its visible triangle.
FunctionLabelProvider cube_paint_provider(const Mesh& mesh);
/// render_labels of a labeled mesh.
FunctionLabelProvider render_provider(const Mesh& labeled);

}  // namespace parte::testing
