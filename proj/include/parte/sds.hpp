#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "parte/error.hpp"
#include "parte/image.hpp"
#include "parte/viewsphere.hpp"

namespace parte {

/// Variance-preserving cosine schedule: alpha(t) = cos(pi t / 2),
/// sigma(t) = sin(pi t / 2), weight w(t) = sigma(t)^2.
class NoiseSchedule {
public:
    double alpha(double t) const;
    double sigma(double t) const;
    double weight(double t) const;
};

/// Opaque conditioning passed through to the score model.
struct ScoreConditions {
    const LabelMap* part_labels = nullptr;  ///< part segments rendered from the labeled surface
    const Image* front_image = nullptr;
    std::vector<std::string> prompts;
    const Viewpoint* view = nullptr;
    std::size_t view_index = 0;
};

/// Noise predictor eps_hat(x_t; t, conditions).
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    /// Output must have the shape of `noisy`.
    virtual Image predict_noise(const Image& noisy, double t, const ScoreConditions& conditions,
                                bool conditional) = 0;
    virtual bool deterministic() const { return true; }
};

/// Closed-form optimal denoiser for a point mass at `target`:
/// eps_hat = (x_t - alpha(t) y) / sigma(t). Ignores the conditions.
class DeltaScore final : public ScoreModel {
public:
    explicit DeltaScore(Image target, NoiseSchedule schedule = {})
        : target_(std::move(target)), schedule_(schedule) {}

    Image predict_noise(const Image& noisy, double t, const ScoreConditions& conditions, bool conditional) override;
    const Image& target() const { return target_; }

private:
    Image target_;
    NoiseSchedule schedule_;
};

std::unique_ptr<ScoreModel> delta_score(Image target, NoiseSchedule schedule = {});

/// Returns a fixed noise image on every call; models a denoiser that recovers
/// the injected noise exactly.
class FixedNoiseScore final : public ScoreModel {
public:
    explicit FixedNoiseScore(Image eps) : eps_(std::move(eps)) {}
    Image predict_noise(const Image& noisy, double, const ScoreConditions&, bool) override;

private:
    Image eps_;
};

/// x_t = alpha(t) x + sigma(t) eps. Throws ContractError on shape mismatch or
/// t outside (0, 1).
Image perturb(const Image& image, double t, const Image& eps, const NoiseSchedule& schedule = {});

/// eps_uncond + scale (eps_cond - eps_uncond).
Image cfg_combine(const Image& eps_cond, const Image& eps_uncond, double scale);

/// Standard-normal image of the given shape.
template <typename Rng>
Image gaussian_like(const Image& shape, Rng& rng);

struct SdsSample {
    double t = 0.5;
    const Image* eps = nullptr;
};

/// Per-pixel SDS upstream gradient w(t) alpha(t) (eps_hat - eps) with
/// eps_hat from classifier-free guidance at `cfg_scale` (the unconditional
/// query is skipped when the scale is exactly 1). Failures of the score model
/// are rethrown with the view index and t.
Image sds_pixel_grad(const Image& render, ScoreModel& score, const ScoreConditions& conditions, double t,
                     const Image& eps, double cfg_scale, const NoiseSchedule& schedule = {});

/// Gradient of the masked mean over pixels of |render_p - target_p|^2
/// (squared RGB distance): 2 (render - target) / |mask| on masked pixels, 0
/// elsewhere. An empty mask yields zero and sets `empty_mask` when given.
Image recon_grad(const Image& render, const Image& target, std::span<const std::uint8_t> mask,
                 bool* empty_mask = nullptr);
double recon_loss(const Image& render, const Image& target, std::span<const std::uint8_t> mask);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update in place. Throws NumericalError on a
/// non-finite gradient and ContractError on size mismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               const AdamParams& hp = {});

class ScoreModelError : public Error {
public:
    ScoreModelError(std::size_t view_index, double t, const std::string& what)
        : Error("score model failed (view " + std::to_string(view_index) + ", t=" + std::to_string(t) + "): " + what) {}
};

}  // namespace parte

template <typename Rng>
parte::Image parte::gaussian_like(const Image& shape, Rng& rng) {
    Image out(shape.width, shape.height, shape.channels);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : out.data) v = n(rng);
    return out;
}
