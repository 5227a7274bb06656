#include <doctest.h>

#include <cmath>
#include <random>

#include "parte/colorfield.hpp"
#include "parte/error.hpp"
#include "parte/shapes.hpp"

using namespace parte;

namespace {

ColorFieldConfig tiny_config() {
    ColorFieldConfig c;
    c.levels = 2;
    c.base_resolution = 2;
    c.max_resolution = 4;
    c.features_per_level = 2;
    c.log2_table_size = 4;
    c.hidden = 4;
    return c;
}

ColorFieldConfig small_config() {
    ColorFieldConfig c;
    c.levels = 4;
    c.base_resolution = 4;
    c.max_resolution = 64;
    c.log2_table_size = 10;
    c.hidden = 8;
    return c;
}

ColorField random_field(const ColorFieldConfig& cfg, std::uint64_t seed, double scale = 1.0) {
    ColorField f = ColorField::zeros(cfg);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& p : f.params()) p = u(rng);
    return f;
}

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    return pts;
}

double weighted_sum(const ColorField& f, const std::vector<Vec3>& pts, const std::vector<Vec3>& up) {
    double s = 0.0;
    const auto rgb = f.eval(pts);
    for (std::size_t i = 0; i < pts.size(); ++i) s += up[i].dot(rgb[i]);
    return s;
}

}  // namespace

TEST_CASE("layout and resolutions") {
    const ColorFieldConfig def;
    const auto res = level_resolutions(def);
    REQUIRE(res.size() == 12);
    CHECK(res.front() == 16);
    CHECK(res.back() == 2048);
    for (std::size_t l = 1; l < res.size(); ++l) CHECK(res[l] > res[l - 1]);

    const FieldLayout l = FieldLayout::of(def);
    CHECK(l.total == 12u * 65536 * 2 + 32 * 24 + 32 + 3 * 32 + 3);
    CHECK(ColorField::zeros(def).param_count() == l.total);
    CHECK(ColorField::zeros(tiny_config()).param_count() == 99);

    ColorFieldConfig bad = def;
    bad.max_resolution = 8;
    CHECK_THROWS_AS(level_resolutions(bad), ArgumentError);
}

TEST_CASE("table indexing") {
    const ColorField f = ColorField::zeros(ColorFieldConfig{});
    // Level 0 (17^3 corners) fits the table and is indexed densely.
    CHECK(f.table_index(0, 1, 2, 3) == 1u + 17u * (2u + 17u * 3u));
    const std::uint32_t x = 1000, y = 7, z = 2047;
    CHECK(f.table_index(11, x, y, z) == ((x ^ (y * 2654435761u) ^ (z * 805459861u)) & 0xffffu));
}

TEST_CASE("neutral starts") {
    const auto pts = random_points(50, 1);
    for (const Vec3& c : ColorField::zeros(small_config()).eval(pts)) CHECK((c - Vec3::Constant(0.5)).norm() == 0.0);
    const ColorField init = ColorField::initialize(ColorFieldConfig{}, 42);
    for (const Vec3& c : init.eval(pts)) CHECK((c - Vec3::Constant(0.5)).norm() == 0.0);
    for (std::size_t i = init.layout().tables; i < init.layout().w1; ++i) CHECK(std::abs(init.params()[i]) <= 1e-4);
    CHECK(init == ColorField::initialize(ColorFieldConfig{}, 42));
    CHECK_FALSE(init == ColorField::initialize(ColorFieldConfig{}, 43));
}

TEST_CASE("evaluation properties") {
    const ColorField f = random_field(small_config(), 7, 2.0);
    SUBCASE("deterministic and bounded") {
        const Vec3 p(0.3, 0.6, 0.9);
        CHECK(f.eval(p) == f.eval(p));
        const ColorField wild = random_field(small_config(), 8, 1e3);
        for (const Vec3& c : wild.eval(random_points(200, 2))) {
            CHECK(c.allFinite());
            CHECK(c.minCoeff() >= 0.0);
            CHECK(c.maxCoeff() <= 1.0);
        }
    }
    SUBCASE("out-of-range points are clamped and counted") {
        EvalStats stats;
        const Vec3 inside = f.eval(Vec3(1.0, 0.2, 0.0), &stats);
        const Vec3 outside = f.eval(Vec3(1.5, 0.2, -0.1), &stats);
        CHECK(stats.points == 2);
        CHECK(stats.clamped == 1);
        CHECK(inside == outside);
    }
    SUBCASE("continuous across cell boundaries") {
        const double x = 17.0 / 64.0;  // a finest-level cell face
        const Vec3 a = f.eval(Vec3(x - 1e-10, 0.4, 0.7));
        const Vec3 b = f.eval(Vec3(x + 1e-10, 0.4, 0.7));
        CHECK((a - b).norm() < 1e-6);
    }
    SUBCASE("equal corner features give equal outputs within a cell") {
        ColorField g = random_field(small_config(), 9);
        const Vec3 p(0.3011, 0.5023, 0.7034), q(0.3012, 0.5021, 0.7035);
        const int F = g.config().features_per_level;
        auto params = g.params();
        for (int l = 0; l < g.config().levels; ++l) {
            const int res = g.resolutions()[l];
            std::array<std::uint32_t, 3> cell{};
            for (int k = 0; k < 3; ++k) {
                cell[k] = static_cast<std::uint32_t>(std::floor(p[k] * res));
                REQUIRE(cell[k] == static_cast<std::uint32_t>(std::floor(q[k] * res)));
            }
            for (int c = 0; c < 8; ++c) {
                const auto idx = g.table_index(l, cell[0] + (c & 1), cell[1] + ((c >> 1) & 1), cell[2] + ((c >> 2) & 1));
                for (int f2 = 0; f2 < F; ++f2) {
                    params[g.layout().tables + (static_cast<std::size_t>(l) * g.layout().table_size + idx) * F + f2] =
                        0.25 * (l + 1) * (f2 + 1);
                }
            }
        }
        CHECK((g.eval(p) - g.eval(q)).norm() < 1e-15);
    }
}

TEST_CASE("eval_with_grad matches central differences") {
    const ColorFieldConfig cfg = tiny_config();
    ColorField f = random_field(cfg, 3, 0.8);
    const auto pts = random_points(6, 4);
    std::vector<Vec3> up;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) up.emplace_back(u(rng), u(rng), u(rng));

    std::vector<double> grad(f.param_count(), 0.0);
    std::vector<Vec3> rgb;
    f.eval_with_grad(pts, up, grad, &rgb);
    CHECK(rgb == f.eval(pts));

    const double h = 1e-4;
    double worst = 0.0;
    for (std::size_t i = 0; i < f.param_count(); ++i) {
        const double saved = f.params()[i];
        f.params()[i] = saved + h;
        const double plus = weighted_sum(f, pts, up);
        f.params()[i] = saved - h;
        const double minus = weighted_sum(f, pts, up);
        f.params()[i] = saved;
        const double fd = (plus - minus) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - grad[i]) / scale);
    }
    MESSAGE("max relative error: " << worst);
    CHECK(worst < 1e-4);
}

TEST_CASE("gradient algebra") {
    const ColorField f = random_field(small_config(), 11, 0.5);
    const auto a = random_points(40, 12), b = random_points(30, 13);
    std::vector<Vec3> ua(a.size(), Vec3(0.3, -0.2, 0.9)), ub(b.size(), Vec3(-1.0, 0.5, 0.1));

    std::vector<double> ga(f.param_count()), gb(f.param_count()), gab(f.param_count());
    f.eval_with_grad(a, ua, ga);
    f.eval_with_grad(b, ub, gb);
    std::vector<Vec3> ab = a, uab = ua;
    ab.insert(ab.end(), b.begin(), b.end());
    uab.insert(uab.end(), ub.begin(), ub.end());
    f.eval_with_grad(ab, uab, gab);
    for (std::size_t i = 0; i < gab.size(); ++i) CHECK(std::abs(gab[i] - (ga[i] + gb[i])) < 1e-12);

    std::vector<double> gz(f.param_count(), 0.0);
    f.eval_with_grad(a, std::vector<Vec3>(a.size(), Vec3::Zero()), gz);
    for (double g : gz) CHECK(g == 0.0);

    std::vector<Vec3> bad = ua;
    bad[3] = Vec3(NAN, 0, 0);
    CHECK_THROWS_AS(f.eval_with_grad(a, bad, gz), ContractError);
    std::vector<double> short_grad(3);
    CHECK_THROWS_AS(f.eval_with_grad(a, ua, short_grad), ContractError);
}

TEST_CASE("checkpoints") {
    const ColorField f = random_field(small_config(), 21, 0.5);
    SUBCASE("64-bit is lossless") {
        const LoadedField back = load_field(save_field(f, 17, 64));
        CHECK(back.step == 17);
        CHECK(back.field == f);
    }
    SUBCASE("32-bit rounds once, then is stable") {
        const std::string bytes = save_field(f, 3);
        const LoadedField back = load_field(bytes);
        CHECK(back.field.config() == f.config());
        for (std::size_t i = 0; i < f.param_count(); ++i) {
            CHECK(back.field.params()[i] == static_cast<double>(static_cast<float>(f.params()[i])));
        }
        CHECK(save_field(back.field, back.step) == bytes);
    }
    SUBCASE("header") {
        const std::string bytes = save_field(f, 0);
        CHECK(bytes.substr(0, 8) == "PRTFIELD");
        CHECK(bytes.size() == 8 + 4 * 8 + 8 + 8 + 4 * f.param_count());
    }
    SUBCASE("damage is detected") {
        std::string bytes = save_field(f, 0);
        CHECK_THROWS_AS(load_field(bytes.substr(0, bytes.size() - 1)), FormatError);
        CHECK_THROWS_AS(load_field("PRTFIELX" + bytes.substr(8)), FormatError);
        CHECK_THROWS_AS(load_field(bytes.substr(0, 20)), FormatError);
        bytes[8 + 8] = 9;  // levels = 9 no longer matches the parameter count
        CHECK_THROWS_AS(load_field(bytes), ValidationError);
        CHECK_THROWS_AS(save_field(f, 0, 16), ArgumentError);
    }
}

TEST_CASE("point normalization") {
    const Mesh m = shapes::unit_cube(4.0);
    const Mesh moved = Mesh::create([&] {
        std::vector<Vec3> v;
        for (const Vec3& p : m.vertices()) v.push_back(Vec3(p.x() * 0.5 + 3, p.y() - 1, p.z() * 0.25));
        return v;
    }(), m.faces());
    const PointNormalizer n(moved);
    double lo = 1.0, hi = 0.0;
    for (const Vec3& p : moved.vertices()) {
        const Vec3 q = n(p);
        lo = std::min(lo, q.minCoeff());
        hi = std::max(hi, q.maxCoeff());
    }
    CHECK(lo == doctest::Approx(0.05));
    CHECK(hi == doctest::Approx(0.95));
}
