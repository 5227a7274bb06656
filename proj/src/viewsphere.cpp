#include "parte/viewsphere.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "parte/error.hpp"

namespace parte {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_azimuth(double az) {
    double w = std::fmod(az, kTwoPi);
    if (w < 0) w += kTwoPi;
    if (w >= kTwoPi) w = 0.0;
    return w;
}

Mat3 rotation_for(double az, double el) {
    const Vec3 d(std::sin(az) * std::cos(el), std::sin(el), std::cos(az) * std::cos(el));
    // Horizontal right vector is orthogonal to d for every elevation, poles included.
    const Vec3 right(std::cos(az), 0.0, -std::sin(az));
    const Vec3 up = d.cross(right);
    Mat3 r;
    r.col(0) = right;
    r.col(1) = up;
    r.col(2) = d;
    return r;
}

void check_frame(const OrthoFrame& frame, int resolution) {
    if (!(frame.half_extent > 0.0) || !std::isfinite(frame.half_extent)) {
        throw ArgumentError("orthographic half-extent must be positive");
    }
    if (resolution < 1) throw ArgumentError("resolution must be positive");
}

}  // namespace

Viewpoint make_viewpoint(double azimuth, double elevation, const OrthoFrame& frame, int resolution) {
    check_frame(frame, resolution);
    if (!std::isfinite(azimuth) || !(elevation >= -kPi / 2 && elevation <= kPi / 2)) {
        throw ArgumentError("elevation must lie in [-pi/2, pi/2]");
    }
    Viewpoint v;
    v.azimuth = wrap_azimuth(azimuth);
    v.elevation = elevation;
    v.rotation = rotation_for(v.azimuth, v.elevation);
    v.frame = frame;
    v.resolution = resolution;
    return v;
}

Viewpoint make_viewpoint(const Vec3& direction, const OrthoFrame& frame, int resolution) {
    const double len = direction.norm();
    if (!(len > 0.0) || !std::isfinite(len)) throw ArgumentError("view direction must be non-zero");
    const Vec3 d = direction / len;
    const double el = std::asin(std::clamp(d.y(), -1.0, 1.0));
    const double az = (std::abs(d.x()) + std::abs(d.z()) > 0.0) ? std::atan2(d.x(), d.z()) : 0.0;
    return make_viewpoint(az, el, frame, resolution);
}

std::vector<Viewpoint> sample_viewpoints(std::size_t n, std::uint64_t seed, const OrthoFrame& frame,
                                         int resolution) {
    if (n == 0) throw ArgumentError("sample_viewpoints needs n >= 1");
    check_frame(frame, resolution);

    double phase = 0.0;
    if (seed != 0) {
        std::mt19937_64 rng(seed);
        phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
    }
    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> dirs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double theta = golden_angle * static_cast<double>(i) + phase;
        dirs[i] = Vec3(r * std::cos(theta), y, r * std::sin(theta));
    }
    // Rigid rotation carrying lattice point 0 onto the front direction +z.
    const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(dirs[0], Vec3::UnitZ());
    std::vector<Viewpoint> views;
    views.reserve(n);
    views.push_back(make_viewpoint(0.0, 0.0, frame, resolution));
    for (std::size_t i = 1; i < n; ++i) views.push_back(make_viewpoint(q * dirs[i], frame, resolution));
    return views;
}

std::vector<Viewpoint> cardinal_viewpoints(const OrthoFrame& frame, int resolution) {
    std::vector<Viewpoint> views;
    for (int k = 0; k < 4; ++k) views.push_back(make_viewpoint(k * kPi / 2.0, 0.0, frame, resolution));
    return views;
}

OrthoFrame fit_frame(const Mesh& mesh) {
    OrthoFrame f;
    if (mesh.vertex_count() == 0) return f;
    const auto [lo, hi] = mesh.bounds();
    f.center = 0.5 * (lo + hi);
    const double largest = (hi - lo).maxCoeff();
    f.half_extent = largest > 0.0 ? 0.6 * largest : 1.0;
    return f;
}

double angular_separation(const Viewpoint& a, const Viewpoint& b) {
    const Vec3 da = a.direction(), db = b.direction();
    return std::atan2(da.cross(db).norm(), da.dot(db));
}

nlohmann::json to_json(const Viewpoint& v) {
    return {
        {"azimuth", v.azimuth},
        {"elevation", v.elevation},
        {"resolution", v.resolution},
        {"frame", {{"center", {v.frame.center.x(), v.frame.center.y(), v.frame.center.z()}},
                   {"half_extent", v.frame.half_extent}}},
    };
}

Viewpoint viewpoint_from_json(const nlohmann::json& j) {
    try {
        OrthoFrame f;
        const auto& c = j.at("frame").at("center");
        f.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
        f.half_extent = j.at("frame").at("half_extent").get<double>();
        return make_viewpoint(j.at("azimuth").get<double>(), j.at("elevation").get<double>(), f,
                              j.at("resolution").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad viewpoint JSON: ") + e.what());
    }
}

}  // namespace parte
