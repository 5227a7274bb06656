#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "parte/colorfield.hpp"
#include "parte/mesh.hpp"
#include "parte/raster.hpp"
#include "parte/sds.hpp"

namespace parte {

/// Texturing optimization settings. Defaults follow the published setup:
/// 4000 steps, 4 views per step, guidance scale 100, t in [0.02, 0.98], Adam
/// from lr 1e-2 with exponential decay reaching 1e-3 at step 4000.
struct SdsConfig {
    std::uint64_t steps = 4000;
    int batch = 4;
    double cfg_scale = 100.0;
    double t_min = 0.02;
    double t_max = 0.98;
    double lr = 1e-2;
    double lr_decay = std::pow(0.1, 1.0 / 4000.0);
    std::uint64_t seed = 0;
    int resolution = kDefaultResolution;
    double recon_weight = 1.0;
    double sds_weight = 1.0;
    std::vector<std::string> prompts;

    double lr_at(std::uint64_t step) const { return lr * std::pow(lr_decay, static_cast<double>(step)); }
};

/// Throws ArgumentError when an invariant fails.
void validate(const SdsConfig& cfg);

nlohmann::json to_json(const SdsConfig& cfg);
/// Keys absent from `j` keep the value from `base`; unknown keys are rejected.
SdsConfig sds_config_from_json(const nlohmann::json& j, const SdsConfig& base = {});

/// Geometry-side state shared by every step: the frozen mesh, the point
/// normalization and the front-view target.
class TexturingScene {
public:
    /// `front_mask` empty means "the mesh's own front-view silhouette".
    /// Throws ContractError when the front image is not resolution x resolution RGB.
    TexturingScene(const Mesh& mesh, Image front_image, std::vector<std::uint8_t> front_mask, int resolution,
                   std::vector<std::string> prompts = {});

    const Mesh& mesh() const { return mesh_; }
    const PointNormalizer& normalizer() const { return normalizer_; }
    const OrthoFrame& frame() const { return frame_; }
    int resolution() const { return resolution_; }
    const Image& front_image() const { return front_image_; }
    const std::vector<std::uint8_t>& front_mask() const { return front_mask_; }
    const std::vector<std::string>& prompts() const { return prompts_; }
    const Viewpoint& front_view() const { return front_view_; }
    const RenderBuffers& front_buffers() const { return front_buffers_; }

private:
    Mesh mesh_;
    PointNormalizer normalizer_;
    OrthoFrame frame_;
    int resolution_;
    Image front_image_;
    std::vector<std::uint8_t> front_mask_;
    std::vector<std::string> prompts_;
    Viewpoint front_view_;
    RenderBuffers front_buffers_;
};

/// Field render of one view: foreground pixels show the field at the
/// (normalized) visible surface point, background is white.
struct FieldRender {
    Image image;
    std::vector<std::size_t> pixels;  ///< foreground pixel indices
    std::vector<Vec3> points;         ///< normalized field inputs, parallel to `pixels`
};

FieldRender render_field(const TexturingScene& scene, const ColorField& field, const RenderBuffers& buffers);

/// One loss evaluation site: a view with its frozen noise sample.
struct ViewTerm {
    Viewpoint view;
    bool is_front = false;
    double t = 0.5;
    Image eps;
};

struct GradientReport {
    double recon_loss = 0.0;
    double sds_grad_norm = 0.0;
};

/// Adds the gradient of recon_weight * L_recon (front view) plus the SDS
/// term averaged over `terms` into `grad`. Throws NumericalError naming the
/// view when a pixel gradient is non-finite.
GradientReport accumulate_gradient(const TexturingScene& scene, const ColorField& field, std::span<const ViewTerm> terms,
                                   ScoreModel& score, const SdsConfig& cfg, std::span<double> grad);

struct StepRecord {
    std::uint64_t step = 0;
    double recon_loss = 0.0;
    double sds_grad_norm = 0.0;
    double lr = 0.0;
};

using ProgressFn = std::function<void(const StepRecord&)>;

struct OptimizeResult {
    Mesh textured;  ///< input mesh with vertex colors from the final field
    ColorField field;
    std::uint64_t steps = 0;
};

/// Per step: the front view plus batch-1 directions drawn uniformly on the
/// sphere, one (t, eps) sample per view, L = L_recon + L_SDS backpropagated
/// through the render into the field, then Adam at lr_at(step). The score
/// model is skipped entirely when sds_weight is 0. Serial and deterministic
/// for a fixed seed.
OptimizeResult optimize(const TexturingScene& scene, ColorField field, ScoreModel& score, const SdsConfig& cfg,
                        const ProgressFn& progress = {});

/// Vertex colors from the field.
std::vector<Vec3> field_vertex_colors(const TexturingScene& scene, const ColorField& field);

}  // namespace parte
