#include <doctest.h>

#include <cmath>
#include <random>

#include "parte/error.hpp"
#include "parte/optimize.hpp"
#include "parte/sds.hpp"

using namespace parte;

namespace {

Image random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h, 3);
    for (double& v : img.data) v = u(rng);
    return img;
}

double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

class CountingScore final : public ScoreModel {
public:
    explicit CountingScore(Image eps) : eps_(std::move(eps)) {}
    Image predict_noise(const Image&, double, const ScoreConditions&, bool conditional) override {
        (conditional ? cond : uncond) += 1;
        return eps_;
    }
    int cond = 0, uncond = 0;

private:
    Image eps_;
};

class ThrowingScore final : public ScoreModel {
public:
    Image predict_noise(const Image&, double, const ScoreConditions&, bool) override {
        throw std::runtime_error("service went away");
    }
};

}  // namespace

TEST_CASE("noise schedule") {
    const NoiseSchedule s;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000000; ++i) {
        const double t = u(rng);
        const double a = s.alpha(t), g = s.sigma(t);
        worst = std::max(worst, std::abs(a * a + g * g - 1.0));
    }
    CHECK(worst < 1e-12);
    double prev_a = 2.0, prev_s = -1.0;
    for (int i = 1; i < 1000; ++i) {
        const double t = i / 1000.0;
        CHECK(s.alpha(t) < prev_a);
        CHECK(s.sigma(t) > prev_s);
        CHECK(s.weight(t) > 0.0);
        CHECK(s.weight(t) == doctest::Approx(s.sigma(t) * s.sigma(t)));
        prev_a = s.alpha(t);
        prev_s = s.sigma(t);
    }
}

TEST_CASE("perturb") {
    const NoiseSchedule s;
    const Image x = random_image(8, 8, 2);
    const Image zero(8, 8, 3);
    SUBCASE("zero noise scales the image") {
        const Image xt = perturb(x, 0.3, zero);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(xt.data[i] == s.alpha(0.3) * x.data[i]);
    }
    SUBCASE("small t keeps the image") {
        const Image eps = random_image(8, 8, 3, -3, 3);
        CHECK(max_abs_diff(perturb(x, 1e-6, eps), x) < 1e-3);
    }
    SUBCASE("variance of pure noise") {
        std::mt19937_64 rng(4);
        const double t = 0.37;
        double mean = 0.0;
        const int draws = 10000;
        for (int k = 0; k < draws; ++k) {
            const Image xt = perturb(zero, t, gaussian_like(zero, rng));
            double n2 = 0.0;
            for (double v : xt.data) n2 += v * v;
            mean += n2 / draws;
        }
        const double expected = s.sigma(t) * s.sigma(t) * static_cast<double>(zero.size());
        CHECK(std::abs(mean - expected) / expected < 0.03);
    }
    SUBCASE("contract") {
        CHECK_THROWS_AS(perturb(x, 0.5, Image(4, 4, 3)), ContractError);
        CHECK_THROWS_AS(perturb(x, 0.0, zero), ContractError);
        CHECK_THROWS_AS(perturb(x, 1.0, zero), ContractError);
    }
}

TEST_CASE("classifier-free guidance") {
    const Image c = random_image(4, 4, 5, -1, 1), u = random_image(4, 4, 6, -1, 1);
    CHECK(max_abs_diff(cfg_combine(c, u, 1.0), c) < 1e-15);
    CHECK(cfg_combine(c, u, 0.0).data == u.data);
    for (double scale : {0.0, 1.0, 7.5, 100.0}) CHECK(cfg_combine(c, c, scale).data == c.data);
    const Image g = cfg_combine(c, u, 100.0);
    CHECK(g.data[3] == doctest::Approx(u.data[3] + 100.0 * (c.data[3] - u.data[3])));
    CHECK_THROWS_AS(cfg_combine(c, Image(2, 2, 3), 1.0), ContractError);
}

TEST_CASE("delta score") {
    const NoiseSchedule s;
    const Image y = random_image(6, 5, 7);
    const Image eps = random_image(6, 5, 8, -2, 2);
    DeltaScore d(y);
    for (double t : {0.02, 0.3, 0.7, 0.98}) {
        const Image back = d.predict_noise(perturb(y, t, eps), t, {}, true);
        CHECK(max_abs_diff(back, eps) < 1e-12);
        const Image clean = d.predict_noise(perturb(y, t, Image(6, 5, 3)), t, {}, false);
        CHECK(max_abs_diff(clean, Image(6, 5, 3)) < 1e-15);
    }
}

TEST_CASE("SDS pixel gradient") {
    const NoiseSchedule s;
    const Image x = random_image(8, 8, 9);
    const Image y = random_image(8, 8, 10);
    std::mt19937_64 rng(11);

    SUBCASE("delta score gives the closed form") {
        DeltaScore d(y);
        double worst = 0.0;
        for (int k = 0; k < 50; ++k) {
            const double t = 0.02 + 0.96 * (k + 0.5) / 50.0;
            const Image eps = gaussian_like(x, rng);
            for (double scale : {1.0, 100.0}) {
                const Image g = sds_pixel_grad(x, d, {}, t, eps, scale);
                const double c = s.weight(t) * s.alpha(t) * s.alpha(t) / s.sigma(t);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    worst = std::max(worst, std::abs(g.data[i] - c * (x.data[i] - y.data[i])));
                }
            }
        }
        CHECK(worst < 1e-10);
    }
    SUBCASE("a truthful denoiser gives exactly zero") {
        for (double scale : {0.0, 1.0, 100.0}) {
            const Image eps = gaussian_like(x, rng);
            FixedNoiseScore truthful(eps);
            for (double v : sds_pixel_grad(x, truthful, {}, 0.4, eps, scale).data) CHECK(v == 0.0);
        }
    }
    SUBCASE("gradient is w(t) alpha(t) (eps_hat - eps)") {
        const Image eps = gaussian_like(x, rng);
        const Image eps_hat = gaussian_like(x, rng);
        FixedNoiseScore fixed(eps_hat);
        const Image g = sds_pixel_grad(x, fixed, {}, 0.6, eps, 1.0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            CHECK(g.data[i] == doctest::Approx(s.weight(0.6) * s.alpha(0.6) * (eps_hat.data[i] - eps.data[i])));
        }
    }
    SUBCASE("the unconditional query is skipped at scale 1") {
        CountingScore count(x);
        sds_pixel_grad(x, count, {}, 0.5, x, 1.0);
        CHECK(count.cond == 1);
        CHECK(count.uncond == 0);
        sds_pixel_grad(x, count, {}, 0.5, x, 100.0);
        CHECK(count.cond == 2);
        CHECK(count.uncond == 1);
    }
    SUBCASE("score failures carry view and t") {
        ThrowingScore bad;
        ScoreConditions cond;
        cond.view_index = 3;
        try {
            sds_pixel_grad(x, bad, cond, 0.25, x, 100.0);
            FAIL("expected ScoreModelError");
        } catch (const ScoreModelError& e) {
            const std::string what = e.what();
            CHECK(what.find("view 3") != std::string::npos);
            CHECK(what.find("t=0.25") != std::string::npos);
        }
        FixedNoiseScore wrong_shape(Image(2, 2, 3));
        CHECK_THROWS_AS(sds_pixel_grad(x, wrong_shape, cond, 0.25, x, 1.0), ScoreModelError);
    }
}

TEST_CASE("reconstruction gradient") {
    const Image r = random_image(4, 4, 12), t = random_image(4, 4, 13);
    std::vector<std::uint8_t> mask(16, 1);
    mask[5] = 0;

    SUBCASE("zero at the minimum") {
        for (double v : recon_grad(r, r, mask).data) CHECK(v == 0.0);
        CHECK(recon_loss(r, r, mask) == 0.0);
    }
    SUBCASE("finite differences") {
        const Image g = recon_grad(r, t, mask);
        const double h = 1e-6;
        double worst = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            Image plus = r, minus = r;
            plus.data[i] += h;
            minus.data[i] -= h;
            const double fd = (recon_loss(plus, t, mask) - recon_loss(minus, t, mask)) / (2 * h);
            worst = std::max(worst, std::abs(fd - g.data[i]));
        }
        CHECK(worst < 1e-9);
        for (int c = 0; c < 3; ++c) CHECK(g.data[5 * 3 + c] == 0.0);
        CHECK(g.data[0] == doctest::Approx(2.0 * (r.data[0] - t.data[0]) / 15.0));
    }
    SUBCASE("empty mask") {
        bool empty = false;
        const Image g = recon_grad(r, t, std::vector<std::uint8_t>(16, 0), &empty);
        CHECK(empty);
        for (double v : g.data) CHECK(v == 0.0);
    }
    SUBCASE("contract") {
        CHECK_THROWS_AS(recon_grad(r, Image(3, 3, 3), mask), ContractError);
        CHECK_THROWS_AS(recon_grad(r, t, std::vector<std::uint8_t>(3, 1)), ContractError);
    }
}

TEST_CASE("Adam") {
    SUBCASE("zero gradient") {
        std::vector<double> p{1.0, -2.0};
        AdamState st;
        st.m = {0.5, 0.5};
        st.v = {0.25, 0.25};
        st.step = 3;
        const std::vector<double> g{0.0, 0.0};
        const std::vector<double> before = p;
        adam_step(p, g, st, 0.01);
        CHECK(st.m[0] == doctest::Approx(0.45));
        CHECK(st.v[0] == doctest::Approx(0.24975));
        CHECK(st.step == 4);
        // Decaying moments still move parameters; with fresh state nothing moves.
        std::vector<double> q = before;
        AdamState fresh;
        adam_step(q, g, fresh, 0.01);
        CHECK(q == before);
    }
    SUBCASE("first step") {
        std::vector<double> p{0.0};
        AdamState st;
        adam_step(p, std::vector<double>{1.0}, st, 0.01);
        CHECK(p[0] == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-14));
    }
    SUBCASE("quadratic bowl") {
        std::vector<double> p{1.0};
        AdamState st;
        for (int i = 0; i < 200; ++i) adam_step(p, std::vector<double>{2.0 * p[0]}, st, 0.05);
        CHECK(std::abs(p[0]) < 1e-3);
    }
    SUBCASE("errors") {
        std::vector<double> p{0.0, 0.0};
        AdamState st;
        CHECK_THROWS_AS(adam_step(p, std::vector<double>{1.0, NAN}, st, 0.01), NumericalError);
        CHECK_THROWS_AS(adam_step(p, std::vector<double>{1.0}, st, 0.01), ContractError);
    }
}

TEST_CASE("gaussian_like") {
    std::mt19937_64 rng(99);
    const Image g = gaussian_like(Image(64, 64, 3), rng);
    double mean = 0.0, var = 0.0;
    for (double v : g.data) mean += v / g.size();
    for (double v : g.data) var += (v - mean) * (v - mean) / g.size();
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("learning-rate schedule") {
    const SdsConfig cfg;
    CHECK(cfg.lr_at(0) == 1e-2);
    CHECK(cfg.lr_at(4000) == doctest::Approx(1e-3).epsilon(1e-12));
}
