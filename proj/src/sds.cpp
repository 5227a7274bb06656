#include "parte/sds.hpp"

#include <cmath>

#include "parte/error.hpp"

namespace parte {

namespace {

void check_t(double t) {
    if (!(t > 0.0 && t < 1.0)) throw ContractError("noise level t must lie in (0, 1), got " + std::to_string(t));
}

}  // namespace

Image DeltaScore::predict_noise(const Image& noisy, double t, const ScoreConditions&, bool) {
    require_same_shape(noisy, target_, "delta_score");
    check_t(t);
    const double a = schedule_.alpha(t), s = schedule_.sigma(t);
    Image out(noisy.width, noisy.height, noisy.channels);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (noisy.data[i] - a * target_.data[i]) / s;
    return out;
}

std::unique_ptr<ScoreModel> delta_score(Image target, NoiseSchedule schedule) {
    return std::make_unique<DeltaScore>(std::move(target), schedule);
}

Image FixedNoiseScore::predict_noise(const Image& noisy, double, const ScoreConditions&, bool) {
    require_same_shape(noisy, eps_, "fixed_noise_score");
    return eps_;
}

Image perturb(const Image& image, double t, const Image& eps, const NoiseSchedule& schedule) {
    require_same_shape(image, eps, "perturb");
    check_t(t);
    const double a = schedule.alpha(t), s = schedule.sigma(t);
    Image out(image.width, image.height, image.channels);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a * image.data[i] + s * eps.data[i];
    return out;
}

Image cfg_combine(const Image& eps_cond, const Image& eps_uncond, double scale) {
    require_same_shape(eps_cond, eps_uncond, "cfg_combine");
    Image out(eps_cond.width, eps_cond.height, eps_cond.channels);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = eps_uncond.data[i] + scale * (eps_cond.data[i] - eps_uncond.data[i]);
    }
    return out;
}

Image sds_pixel_grad(const Image& render, ScoreModel& score, const ScoreConditions& conditions, double t,
                     const Image& eps, double cfg_scale, const NoiseSchedule& schedule) {
    const Image noisy = perturb(render, t, eps, schedule);
    Image eps_hat;
    try {
        Image cond = score.predict_noise(noisy, t, conditions, true);
        require_same_shape(cond, render, "score model output");
        if (cfg_scale == 1.0) {
            eps_hat = std::move(cond);
        } else {
            Image uncond = score.predict_noise(noisy, t, conditions, false);
            require_same_shape(uncond, render, "score model output");
            eps_hat = cfg_combine(cond, uncond, cfg_scale);
        }
    } catch (const std::exception& e) {
        throw ScoreModelError(conditions.view_index, t, e.what());
    }
    const double factor = schedule.weight(t) * schedule.alpha(t);
    Image grad(render.width, render.height, render.channels);
    for (std::size_t i = 0; i < grad.size(); ++i) grad.data[i] = factor * (eps_hat.data[i] - eps.data[i]);
    return grad;
}

namespace {

std::size_t masked_count(const Image& render, std::span<const std::uint8_t> mask) {
    if (mask.size() != render.pixel_count()) throw ContractError("recon: mask size differs from image");
    std::size_t n = 0;
    for (auto m : mask) n += m != 0;
    return n;
}

}  // namespace

Image recon_grad(const Image& render, const Image& target, std::span<const std::uint8_t> mask, bool* empty_mask) {
    require_same_shape(render, target, "recon_grad");
    const std::size_t count = masked_count(render, mask);
    Image grad(render.width, render.height, render.channels);
    if (empty_mask) *empty_mask = count == 0;
    if (count == 0) return grad;
    const double scale = 2.0 / static_cast<double>(count);
    const int ch = render.channels;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        for (int c = 0; c < ch; ++c) {
            const std::size_t i = p * ch + c;
            grad.data[i] = scale * (render.data[i] - target.data[i]);
        }
    }
    return grad;
}

double recon_loss(const Image& render, const Image& target, std::span<const std::uint8_t> mask) {
    require_same_shape(render, target, "recon_loss");
    const std::size_t count = masked_count(render, mask);
    if (count == 0) return 0.0;
    double sum = 0.0;
    const int ch = render.channels;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        for (int c = 0; c < ch; ++c) {
            const double d = render.data[p * ch + c] - target.data[p * ch + c];
            sum += d * d;
        }
    }
    return sum / static_cast<double>(count);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               const AdamParams& hp) {
    if (grads.size() != params.size()) throw ContractError("adam_step: gradient size differs from parameters");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw ContractError("adam_step: optimizer state size differs");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) throw NumericalError("adam_step: non-finite gradient at index " + std::to_string(i));
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    }
}

}  // namespace parte
