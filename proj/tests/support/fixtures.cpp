#include "fixtures.hpp"

#include <cstdlib>
#include <stdexcept>

#include "parte/raster.hpp"
#include "parte/shapes.hpp"

#ifndef PARTE_TEST_DATA_DIR
#error "PARTE_TEST_DATA_DIR must be defined"
#endif

namespace parte::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "parte-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

fs::path data_dir() { return PARTE_TEST_DATA_DIR; }

PartLabel hemisphere_paint(const Vec3& p) {
    return p.y() > 0.137 ? PartLabel::upper_clothes : PartLabel::lower_clothes;
}

Mesh sphere_fixture() { return shapes::icosphere(4, 1.0); }

Mesh painted_sphere() {
    Mesh m = sphere_fixture();
    std::vector<PartLabel> labels;
    for (const Vec3& v : m.vertices()) labels.push_back(hemisphere_paint(v));
    return m.with_labels(std::move(labels));
}

PartLabel cube_face_paint(int cube_face) { return kForegroundLabels[static_cast<std::size_t>(cube_face % 5)]; }

int cube_face_of_normal(const Vec3& n) {
    int axis;
    n.cwiseAbs().maxCoeff(&axis);
    return 2 * axis + (n[axis] < 0.0 ? 1 : 0);
}

Mesh painted_cube(std::vector<PartLabel>* paint, int cells) {
    std::vector<int> face_of_vertex;
    Mesh m = shapes::grid_cube(cells, 2.0, &face_of_vertex);
    if (paint) {
        paint->clear();
        for (int f : face_of_vertex) paint->push_back(cube_face_paint(f));
    }
    return m;
}

FunctionLabelProvider sphere_paint_provider(const Mesh& mesh) {
    return FunctionLabelProvider([&mesh](const LabelProvider::Request& r) {
        LabelMap out(r.buffers.width, r.buffers.height);
        const std::vector<Vec3> pts = surface_points(mesh, r.buffers);
        for (std::size_t p = 0; p < out.pixel_count(); ++p) {
            if (r.buffers.mask[p]) out.codes[p] = to_code(hemisphere_paint(pts[p]));
        }
        return out;
    });
}

FunctionLabelProvider cube_paint_provider(const Mesh& mesh) {
    return FunctionLabelProvider([&mesh](const LabelProvider::Request& r) {
        LabelMap out(r.buffers.width, r.buffers.height);
        for (std::size_t p = 0; p < out.pixel_count(); ++p) {
            if (!r.buffers.mask[p]) continue;
            const Face& f = mesh.faces()[r.buffers.face_id[p]];
            const auto& v = mesh.vertices();
            const Vec3 n = (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]);
            out.codes[p] = to_code(cube_face_paint(cube_face_of_normal(n)));
        }
        return out;
    });
}

FunctionLabelProvider render_provider(const Mesh& labeled) {
    return FunctionLabelProvider(
        [&labeled](const LabelProvider::Request& r) { return labels_from_buffers(labeled, r.buffers); });
}

}  // namespace parte::testing
