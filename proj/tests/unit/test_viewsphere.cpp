#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "parte/error.hpp"
#include "parte/shapes.hpp"
#include "parte/viewsphere.hpp"

using namespace parte;

namespace {

double min_separation_deg(const std::vector<Viewpoint>& views) {
    double best = 1e9;
    for (std::size_t i = 0; i < views.size(); ++i)
        for (std::size_t j = i + 1; j < views.size(); ++j)
            best = std::min(best, angular_separation(views[i], views[j]));
    return best * 180.0 / M_PI;
}

bool same(const Viewpoint& a, const Viewpoint& b) {
    return a.azimuth == b.azimuth && a.elevation == b.elevation && a.rotation == b.rotation &&
           a.frame.center == b.frame.center && a.frame.half_extent == b.frame.half_extent &&
           a.resolution == b.resolution;
}

}  // namespace

TEST_CASE("single view is the front") {
    const auto v = sample_viewpoints(1);
    REQUIRE(v.size() == 1);
    CHECK(v[0].azimuth == 0.0);
    CHECK(v[0].elevation == 0.0);
    CHECK((v[0].direction() - Vec3(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("thirty views cover the sphere") {
    const auto views = sample_viewpoints(30);
    REQUIRE(views.size() == 30);
    CHECK(views[0].azimuth == 0.0);
    CHECK(views[0].elevation == 0.0);
    const double sep = min_separation_deg(views);
    MESSAGE("minimum pairwise separation: " << sep << " deg");
    CHECK(sep >= 18.0);

    Vec3 mean = Vec3::Zero();
    for (const auto& v : views) mean += v.direction();
    CHECK((mean / 30.0).norm() < 0.05);
}

TEST_CASE("sampling is deterministic and the seed perturbs the phase") {
    const auto a = sample_viewpoints(30, 0);
    const auto b = sample_viewpoints(30, 0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(same(a[i], b[i]));

    const auto c = sample_viewpoints(30, 7);
    const auto d = sample_viewpoints(30, 7);
    CHECK(c[0].azimuth == 0.0);
    CHECK(c[0].elevation == 0.0);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(same(c[i], d[i]));
        differs |= !same(a[i], c[i]);
    }
    CHECK(differs);
    CHECK_THROWS_AS(sample_viewpoints(0), ArgumentError);
}

TEST_CASE("viewpoint invariants") {
    for (std::size_t n : {2u, 5u, 30u, 100u}) {
        for (const auto& v : sample_viewpoints(n, 3)) {
            CHECK((v.rotation.transpose() * v.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
            CHECK(v.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
            // Camera forward (-z) looks back at the center.
            CHECK((v.rotation * Vec3(0, 0, -1) + v.direction()).norm() < 1e-12);
            CHECK(v.azimuth >= 0.0);
            CHECK(v.azimuth < 2 * M_PI);
            CHECK(std::abs(v.elevation) <= M_PI / 2);
            const Vec3 d(std::sin(v.azimuth) * std::cos(v.elevation), std::sin(v.elevation),
                         std::cos(v.azimuth) * std::cos(v.elevation));
            CHECK((d - v.direction()).norm() < 1e-9);
        }
    }
}

TEST_CASE("cardinal views") {
    const auto c = cardinal_viewpoints();
    REQUIRE(c.size() == 4);
    CHECK(c[0].azimuth == 0.0);
    CHECK(c[1].azimuth == doctest::Approx(M_PI / 2));
    CHECK(c[2].azimuth == doctest::Approx(M_PI));
    CHECK(c[3].azimuth == doctest::Approx(3 * M_PI / 2));
    for (const auto& v : c) CHECK(v.elevation == 0.0);
    CHECK((c[1].direction() - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("make_viewpoint") {
    CHECK(make_viewpoint(-M_PI / 2, 0.0).azimuth == doctest::Approx(3 * M_PI / 2));
    CHECK_THROWS_AS(make_viewpoint(0.0, 2.0), ArgumentError);
    const Viewpoint top = make_viewpoint(Vec3(0, 5, 0));
    CHECK(top.elevation == doctest::Approx(M_PI / 2));
    CHECK((top.direction() - Vec3(0, 1, 0)).norm() < 1e-12);
    CHECK((top.rotation.transpose() * top.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("frame fit and JSON") {
    const Mesh cube = shapes::unit_cube(2.0);
    const OrthoFrame f = fit_frame(cube);
    CHECK(f.center.norm() < 1e-15);
    CHECK(f.half_extent == doctest::Approx(1.2));

    const Viewpoint v = make_viewpoint(1.0, -0.3, f, 64);
    const Viewpoint back = viewpoint_from_json(nlohmann::json::parse(to_json(v).dump()));
    CHECK(back.azimuth == v.azimuth);
    CHECK(back.elevation == v.elevation);
    CHECK(back.resolution == 64);
    CHECK(back.frame.half_extent == f.half_extent);
    CHECK((back.rotation - v.rotation).cwiseAbs().maxCoeff() == 0.0);
}
