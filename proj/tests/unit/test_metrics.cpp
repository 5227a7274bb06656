#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "parte/error.hpp"
#include "parte/metrics.hpp"
#include "parte/shapes.hpp"

using namespace parte;

namespace {

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (p - (a + t * ab)).norm();
}

// Plane projection with an inside test, else the nearest edge.
double brute_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 n = (b - a).cross(c - a);
    if (n.norm() > 1e-300) {
        const Vec3 un = n.normalized();
        const Vec3 q = p - un * (p - a).dot(un);
        const double s0 = (b - a).cross(q - a).dot(n);
        const double s1 = (c - b).cross(q - b).dot(n);
        const double s2 = (a - c).cross(q - c).dot(n);
        if (s0 >= 0 && s1 >= 0 && s2 >= 0) return (p - q).norm();
    }
    return std::min({segment_distance(p, a, b), segment_distance(p, b, c), segment_distance(p, c, a)});
}

double brute_p2s(const std::vector<Vec3>& pts, const Mesh& m) {
    double sum = 0.0;
    for (const Vec3& p : pts) {
        double best = std::numeric_limits<double>::infinity();
        for (const Face& f : m.faces()) {
            best = std::min(best, brute_triangle_distance(p, m.vertices()[f[0]], m.vertices()[f[1]], m.vertices()[f[2]]));
        }
        sum += best;
    }
    return sum / static_cast<double>(pts.size());
}

double brute_one_way(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double sum = 0.0;
    for (const Vec3& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : b) best = std::min(best, (p - q).norm());
        sum += best;
    }
    return sum / static_cast<double>(a.size());
}

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    return 0.5 * (brute_one_way(a, b) + brute_one_way(b, a));
}

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n, double spread) {
    std::normal_distribution<double> g(0.0, spread);
    std::vector<Vec3> out(n);
    for (auto& p : out) p = Vec3(g(rng), g(rng), g(rng));
    return out;
}

Mesh random_soup(std::mt19937_64& rng, int triangles) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Vec3> v;
    std::vector<Face> f;
    for (int t = 0; t < triangles; ++t) {
        const Vec3 c(g(rng), g(rng), g(rng));
        for (int k = 0; k < 3; ++k) v.push_back(c + 0.4 * Vec3(g(rng), g(rng), g(rng)));
        const auto b = static_cast<std::uint32_t>(3 * t);
        f.push_back({b, b + 1, b + 2});
    }
    return Mesh::create(v, f);
}

Mesh transformed(const Mesh& m, const Eigen::Matrix3d& r, const Vec3& t) {
    std::vector<Vec3> v;
    for (const Vec3& p : m.vertices()) v.push_back(r * p + t);
    return Mesh::create(v, m.faces(), std::nullopt, std::nullopt,
                        m.has_labels() ? std::optional(m.labels()) : std::nullopt);
}

// Five separated 2 cm cubes, one per foreground part.
Mesh part_cubes(int shifted_part = -1) {
    const Mesh cube = shapes::unit_cube(2.0);
    std::vector<Vec3> v;
    std::vector<Face> f;
    std::vector<PartLabel> labels;
    for (int part = 0; part < 5; ++part) {
        const auto base = static_cast<std::uint32_t>(v.size());
        Vec3 offset(10.0 * part, 0, 0);
        if (part == shifted_part) offset.x() += 1.0;
        for (const Vec3& p : cube.vertices()) {
            v.push_back(p + offset);
            labels.push_back(kForegroundLabels[part]);
        }
        for (const Face& fc : cube.faces()) f.push_back({fc[0] + base, fc[1] + base, fc[2] + base});
    }
    return Mesh::create(v, f, std::nullopt, std::nullopt, labels);
}

}  // namespace

TEST_CASE("closest point on triangle") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int i = 0; i < 5000; ++i) {
        const Vec3 a(g(rng), g(rng), g(rng)), b(g(rng), g(rng), g(rng)), c(g(rng), g(rng), g(rng));
        const Vec3 p = 2.0 * Vec3(g(rng), g(rng), g(rng));
        const Vec3 q = closest_point_on_triangle(p, a, b, c);
        CHECK(std::abs((p - q).norm() - brute_triangle_distance(p, a, b, c)) < 1e-9);
    }
    // Degenerate (collinear) triangle falls back to the segment.
    const Vec3 q = closest_point_on_triangle(Vec3(0.5, 1, 0), Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0));
    CHECK((q - Vec3(0.5, 0, 0)).norm() < 1e-12);
}

TEST_CASE("p2s") {
    const Mesh ground = Mesh::create({Vec3(-5, 0, -5), Vec3(5, 0, -5), Vec3(0, 0, 5)}, {Face{0, 1, 2}});
    CHECK(p2s(std::vector<Vec3>{Vec3(0, 1, 0)}, ground) == doctest::Approx(1.0).epsilon(1e-15));

    const Mesh sphere = shapes::icosphere(2);
    const auto on = sample_surface(sphere, 500, 3);
    CHECK(p2s(on, sphere) < 1e-12);

    std::mt19937_64 rng(2);
    for (int inst = 0; inst < 10; ++inst) {
        const Mesh soup = random_soup(rng, 50);
        const auto pts = random_points(rng, 200, 1.5);
        CHECK(std::abs(p2s(pts, soup) - brute_p2s(pts, soup)) < 1e-9);
    }
    CHECK_THROWS_AS(p2s(std::vector<Vec3>{}, sphere), ArgumentError);
    CHECK_THROWS_AS(p2s(on, Mesh{}), ArgumentError);
}

TEST_CASE("chamfer") {
    const std::vector<Vec3> a{Vec3(0, 0, 0)};
    const std::vector<Vec3> b{Vec3(1, 0, 0), Vec3(0, 2, 0)};
    CHECK(chamfer(a, b) == 1.25);
    CHECK(chamfer(b, a) == 1.25);
    CHECK(chamfer(b, b) == 0.0);

    std::mt19937_64 rng(3);
    for (int inst = 0; inst < 10; ++inst) {
        const auto p = random_points(rng, 1 + rng() % 400, 1.0);
        const auto q = random_points(rng, 1 + rng() % 400, 1.2);
        CHECK(std::abs(chamfer(p, q) - brute_chamfer(p, q)) < 1e-9);
        CHECK(chamfer(p, q) == doctest::Approx(chamfer(q, p)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(chamfer(std::vector<Vec3>{}, b), ArgumentError);
}

TEST_CASE("distances are rigid-invariant") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int inst = 0; inst < 5; ++inst) {
        const Eigen::Quaterniond q = Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng)).normalized();
        const Eigen::Matrix3d r = q.toRotationMatrix();
        const Vec3 t(g(rng), g(rng), g(rng));
        const Mesh soup = random_soup(rng, 40);
        const auto pts = random_points(rng, 150, 1.0);
        const auto other = random_points(rng, 120, 1.0);
        std::vector<Vec3> pts_t, other_t;
        for (const Vec3& p : pts) pts_t.push_back(r * p + t);
        for (const Vec3& p : other) other_t.push_back(r * p + t);
        CHECK(std::abs(p2s(pts, soup) - p2s(pts_t, transformed(soup, r, t))) < 1e-9);
        CHECK(std::abs(chamfer(pts, other) - chamfer(pts_t, other_t)) < 1e-9);
        const Mesh cubes = part_cubes(2);
        const Mesh ref = part_cubes();
        CHECK(std::abs(*part_cd(cubes, ref).value - *part_cd(transformed(cubes, r, t), transformed(ref, r, t)).value) <
              1e-9);
    }
}

TEST_CASE("surface sampling") {
    const Mesh cube = shapes::unit_cube(2.0);
    const auto a = sample_surface(cube, 1000, 7);
    CHECK(a.size() == 1000);
    CHECK(a == sample_surface(cube, 1000, 7));
    CHECK_FALSE(a == sample_surface(cube, 1000, 8));
    for (const Vec3& p : a) CHECK(std::abs(p.cwiseAbs().maxCoeff() - 1.0) < 1e-12);
}

TEST_CASE("part CD") {
    const Mesh gt = part_cubes();
    SUBCASE("identity") { CHECK(*part_cd(gt, gt).value == 0.0); }
    SUBCASE("one part shifted by 1 cm") {
        const PartCdResult r = part_cd(part_cubes(3), gt);
        REQUIRE(r.value.has_value());
        CHECK(*r.value == doctest::Approx(0.2).epsilon(1e-14));
        CHECK(r.compared.size() == 5);
    }
    SUBCASE("parts on one side only are excluded and reported") {
        std::vector<PartLabel> labels = gt.labels();
        for (int i = 0; i < 8; ++i) labels[i] = PartLabel::upper_clothes;  // face_hair disappears from pred
        const Mesh pred = gt.with_labels(labels);
        const PartCdResult r = part_cd(pred, gt);
        CHECK(r.only_in_gt == std::vector<PartLabel>{PartLabel::face_hair});
        CHECK(r.compared.size() == 4);
    }
    SUBCASE("nothing in common") {
        const Mesh a = gt.with_labels(std::vector<PartLabel>(gt.vertex_count(), PartLabel::footwear));
        const Mesh b = gt.with_labels(std::vector<PartLabel>(gt.vertex_count(), PartLabel::others));
        const PartCdResult r = part_cd(a, b);
        CHECK_FALSE(r.value.has_value());
        CHECK_FALSE(r.absent_reason.empty());
    }
}

TEST_CASE("part IoU") {
    auto map = [](std::vector<std::uint8_t> codes) {
        LabelMap m(2, 2);
        m.codes = std::move(codes);
        return m;
    };
    const std::vector<LabelMap> pred{map({2, 2, 0, 0})};
    const std::vector<LabelMap> gt{map({2, 0, 0, 0})};
    CHECK(part_iou(pred, gt) == 0.5);
    CHECK(part_iou(pred, pred) == 1.0);
    CHECK(part_iou(std::vector<LabelMap>{map({1, 1, 0, 0})}, std::vector<LabelMap>{map({0, 0, 1, 1})}) == 0.0);

    std::mt19937_64 rng(5);
    std::vector<LabelMap> p4, g4;
    for (int v = 0; v < 4; ++v) {
        LabelMap a(16, 16), b(16, 16);
        for (std::size_t i = 0; i < a.codes.size(); ++i) {
            a.codes[i] = static_cast<std::uint8_t>(rng() % 6);
            b.codes[i] = static_cast<std::uint8_t>(rng() % 6);
        }
        p4.push_back(a);
        g4.push_back(b);
    }
    const double base = part_iou(p4, g4);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    // Relabel the foreground parts consistently on both sides.
    const std::array<std::uint8_t, 6> perm{0, 3, 5, 1, 2, 4};
    for (auto* set : {&p4, &g4})
        for (auto& m : *set)
            for (auto& c : m.codes) c = perm[c];
    CHECK(part_iou(p4, g4) == doctest::Approx(base).epsilon(1e-15));

    CHECK_THROWS_AS(part_iou(pred, std::vector<LabelMap>{LabelMap(3, 3)}), ContractError);
    CHECK_THROWS_AS(part_iou(pred, std::vector<LabelMap>{}), ContractError);
}

TEST_CASE("label accuracy") {
    using L = PartLabel;
    const std::vector<L> gt{L::face_hair, L::upper_clothes, L::lower_clothes, L::footwear};
    CHECK(label_acc(gt, gt) == 1.0);
    std::vector<L> pred = gt;
    pred[2] = L::others;
    CHECK(label_acc(pred, gt) == 0.75);
    CHECK_THROWS_AS(label_acc(pred, std::vector<L>{L::others}), ContractError);
}

TEST_CASE("PSNR") {
    const Image half(8, 8, 3, 0.5), zero(8, 8, 3, 0.0);
    CHECK(psnr(half, half) == kPsnrCapDb);
    CHECK(std::abs(psnr(half, zero) - 6.0206) < 1e-3);
    CHECK(psnr(half, zero) == doctest::Approx(10.0 * std::log10(4.0)));
    CHECK_THROWS_AS(psnr(half, Image(4, 4, 3)), ContractError);
}

TEST_CASE("report JSON") {
    MetricReport r;
    r.p2s_cm = 0.125;
    r.cd_cm = 0.25;
    r.part_cd = part_cd(part_cubes(1), part_cubes());
    r.part_iou = 0.5;
    r.label_acc = 0.75;
    r.psnr_db = {20.0, 30.0};
    r.psnr_mean_db = 25.0;
    r.sample_points = 100;
    r.notes = {"hello"};
    const nlohmann::json j = to_json(r);
    CHECK(j.at("lpips").is_null() == false);
    const MetricReport back = metric_report_from_json(nlohmann::json::parse(j.dump()));
    CHECK(to_json(back) == j);
    CHECK(*back.part_cd.value == *r.part_cd.value);
}
