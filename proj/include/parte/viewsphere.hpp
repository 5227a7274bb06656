#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "parte/mesh.hpp"

namespace parte {

using Mat3 = Eigen::Matrix3d;

inline constexpr int kDefaultResolution = 512;
inline constexpr int kPaperViewCount = 30;

/// Region of the scene an orthographic camera images.
struct OrthoFrame {
    Vec3 center = Vec3::Zero();
    double half_extent = 1.0;
};

/// Orthographic camera on the view sphere around `frame.center`.
///
/// World convention: +y up, the subject faces +z. Azimuth rotates about +y
/// starting at the front (+z); elevation lifts toward +y. The camera sits on
/// direction d = (sin az cos el, sin el, cos az cos el) and looks along -d.
/// `rotation` is camera-to-world with columns (right, up, d), so the camera's
/// forward axis -z maps to -d.
struct Viewpoint {
    double azimuth = 0.0;
    double elevation = 0.0;
    Mat3 rotation = Mat3::Identity();
    OrthoFrame frame;
    int resolution = kDefaultResolution;

    /// Unit vector from the frame center toward the camera.
    Vec3 direction() const { return rotation.col(2); }
};

/// Builds a Viewpoint from angles; azimuth is wrapped into [0, 2π) and
/// elevation must lie in [-π/2, π/2]. Throws ArgumentError otherwise.
Viewpoint make_viewpoint(double azimuth, double elevation, const OrthoFrame& frame = {},
                         int resolution = kDefaultResolution);

/// Same, from a direction vector (need not be normalized).
Viewpoint make_viewpoint(const Vec3& direction, const OrthoFrame& frame = {},
                         int resolution = kDefaultResolution);

/// `n` directions from a Fibonacci lattice, rigidly rotated so view 0 is the
/// exact front view. seed == 0 gives the canonical lattice; any other seed
/// perturbs the lattice phase deterministically.
std::vector<Viewpoint> sample_viewpoints(std::size_t n, std::uint64_t seed = 0,
                                         const OrthoFrame& frame = {},
                                         int resolution = kDefaultResolution);

/// Evaluation turntable: azimuth 0, π/2, π, 3π/2 at elevation 0.
std::vector<Viewpoint> cardinal_viewpoints(const OrthoFrame& frame = {},
                                           int resolution = kDefaultResolution);

/// center = bbox center, half-extent = 0.6 x the largest bbox dimension.
OrthoFrame fit_frame(const Mesh& mesh);

/// Angle in radians between two view directions.
double angular_separation(const Viewpoint& a, const Viewpoint& b);

nlohmann::json to_json(const Viewpoint& v);
/// Rebuilds the rotation from the angles.
Viewpoint viewpoint_from_json(const nlohmann::json& j);

}  // namespace parte
