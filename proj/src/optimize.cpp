#include "parte/optimize.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "parte/error.hpp"

namespace parte {

void validate(const SdsConfig& cfg) {
    if (!(cfg.t_min > 0.0 && cfg.t_min < cfg.t_max && cfg.t_max < 1.0)) {
        throw ArgumentError("t range must satisfy 0 < t_min < t_max < 1");
    }
    if (!(cfg.cfg_scale >= 0.0)) throw ArgumentError("guidance scale must be >= 0");
    if (cfg.batch < 1) throw ArgumentError("batch must be >= 1");
    if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ArgumentError("learning rate must be positive");
    if (!(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0)) throw ArgumentError("lr_decay must lie in (0, 1]");
    if (cfg.resolution < 16) throw ArgumentError("resolution must be >= 16");
    if (!(cfg.recon_weight >= 0.0) || !(cfg.sds_weight >= 0.0)) throw ArgumentError("loss weights must be >= 0");
}

nlohmann::json to_json(const SdsConfig& cfg) {
    return {
        {"steps", cfg.steps},
        {"batch", cfg.batch},
        {"cfg_scale", cfg.cfg_scale},
        {"t_min", cfg.t_min},
        {"t_max", cfg.t_max},
        {"lr", cfg.lr},
        {"lr_decay", cfg.lr_decay},
        {"seed", cfg.seed},
        {"resolution", cfg.resolution},
        {"recon_weight", cfg.recon_weight},
        {"sds_weight", cfg.sds_weight},
        {"prompts", cfg.prompts},
    };
}

SdsConfig sds_config_from_json(const nlohmann::json& j, const SdsConfig& base) {
    if (!j.is_object()) throw ValidationError("SDS config must be a JSON object");
    SdsConfig cfg = base;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "steps") cfg.steps = value.get<std::uint64_t>();
            else if (key == "batch") cfg.batch = value.get<int>();
            else if (key == "cfg_scale") cfg.cfg_scale = value.get<double>();
            else if (key == "t_min") cfg.t_min = value.get<double>();
            else if (key == "t_max") cfg.t_max = value.get<double>();
            else if (key == "lr") cfg.lr = value.get<double>();
            else if (key == "lr_decay") cfg.lr_decay = value.get<double>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "resolution") cfg.resolution = value.get<int>();
            else if (key == "recon_weight") cfg.recon_weight = value.get<double>();
            else if (key == "sds_weight") cfg.sds_weight = value.get<double>();
            else if (key == "prompts") cfg.prompts = value.get<std::vector<std::string>>();
            else throw ValidationError("unknown SDS config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad SDS config value: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

TexturingScene::TexturingScene(const Mesh& mesh, Image front_image, std::vector<std::uint8_t> front_mask,
                               int resolution, std::vector<std::string> prompts)
    : mesh_(mesh.has_normals() ? mesh : compute_vertex_normals(mesh)),
      normalizer_(mesh),
      frame_(fit_frame(mesh)),
      resolution_(resolution),
      front_image_(std::move(front_image)),
      front_mask_(std::move(front_mask)),
      prompts_(std::move(prompts)) {
    if (front_image_.width != resolution || front_image_.height != resolution || front_image_.channels != 3) {
        throw ContractError("front image must be " + std::to_string(resolution) + "x" + std::to_string(resolution) +
                            " RGB");
    }
    front_view_ = make_viewpoint(0.0, 0.0, frame_, resolution);
    front_buffers_ = rasterize(mesh_, front_view_);
    if (front_mask_.empty()) front_mask_ = front_buffers_.mask;
    if (front_mask_.size() != front_buffers_.pixel_count()) throw ContractError("front mask size differs from image");
}

FieldRender render_field(const TexturingScene& scene, const ColorField& field, const RenderBuffers& buffers) {
    FieldRender out;
    out.image = Image(buffers.width, buffers.height, 3, 1.0);
    const auto& mesh = scene.mesh();
    for (std::size_t p = 0; p < buffers.pixel_count(); ++p) {
        if (!buffers.mask[p]) continue;
        const Face& f = mesh.faces()[buffers.face_id[p]];
        const auto& w = buffers.barycentric[p];
        const Vec3 world = w[0] * mesh.vertices()[f[0]] + w[1] * mesh.vertices()[f[1]] + w[2] * mesh.vertices()[f[2]];
        out.pixels.push_back(p);
        out.points.push_back(scene.normalizer()(world));
    }
    const std::vector<Vec3> rgb = field.eval(out.points);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        for (int c = 0; c < 3; ++c) out.image.data[out.pixels[i] * 3 + c] = rgb[i][c];
    }
    return out;
}

GradientReport accumulate_gradient(const TexturingScene& scene, const ColorField& field, std::span<const ViewTerm> terms,
                                   ScoreModel& score, const SdsConfig& cfg, std::span<double> grad) {
    GradientReport report;
    if (terms.empty()) return report;
    const NoiseSchedule schedule;
    const double sds_scale = cfg.sds_weight / static_cast<double>(terms.size());
    std::vector<Vec3> upstream;

    for (std::size_t k = 0; k < terms.size(); ++k) {
        const ViewTerm& term = terms[k];
        RenderBuffers own;
        const RenderBuffers* buffers = &scene.front_buffers();
        if (!term.is_front) {
            own = rasterize(scene.mesh(), term.view);
            buffers = &own;
        }
        const FieldRender render = render_field(scene, field, *buffers);
        Image pixel_grad(render.image.width, render.image.height, 3, 0.0);

        if (term.is_front && cfg.recon_weight > 0.0) {
            const Image g = recon_grad(render.image, scene.front_image(), scene.front_mask());
            report.recon_loss += recon_loss(render.image, scene.front_image(), scene.front_mask());
            for (std::size_t i = 0; i < g.size(); ++i) pixel_grad.data[i] += cfg.recon_weight * g.data[i];
        }
        if (cfg.sds_weight > 0.0) {
            LabelMap part_labels;
            ScoreConditions cond;
            if (scene.mesh().has_labels()) {
                part_labels = labels_from_buffers(scene.mesh(), *buffers);
                cond.part_labels = &part_labels;
            }
            cond.front_image = &scene.front_image();
            cond.prompts = scene.prompts();
            cond.view = &term.view;
            cond.view_index = k;
            const Image g = sds_pixel_grad(render.image, score, cond, term.t, term.eps, cfg.cfg_scale, schedule);
            double norm2 = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                pixel_grad.data[i] += sds_scale * g.data[i];
                norm2 += g.data[i] * g.data[i];
            }
            report.sds_grad_norm += std::sqrt(norm2) / static_cast<double>(terms.size());
        }

        upstream.resize(render.pixels.size());
        for (std::size_t i = 0; i < render.pixels.size(); ++i) {
            const std::size_t p = render.pixels[i];
            upstream[i] = Vec3(pixel_grad.data[p * 3], pixel_grad.data[p * 3 + 1], pixel_grad.data[p * 3 + 2]);
            if (!upstream[i].allFinite()) {
                throw NumericalError("non-finite pixel gradient in view " + std::to_string(k));
            }
        }
        field.eval_with_grad(render.points, upstream, grad);
    }
    if (!std::isfinite(report.recon_loss) || !std::isfinite(report.sds_grad_norm)) {
        throw NumericalError("non-finite loss");
    }
    return report;
}

OptimizeResult optimize(const TexturingScene& scene, ColorField field, ScoreModel& score, const SdsConfig& cfg,
                        const ProgressFn& progress) {
    validate(cfg);
    if (scene.resolution() != cfg.resolution) throw ContractError("scene resolution differs from config resolution");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Image shape(cfg.resolution, cfg.resolution, 3);
    const bool use_sds = cfg.sds_weight > 0.0;

    AdamState adam;
    std::vector<double> grad(field.param_count());
    std::vector<ViewTerm> terms;

    for (std::uint64_t step = 0; step < cfg.steps; ++step) {
        terms.clear();
        const int nviews = use_sds ? cfg.batch : 1;
        for (int k = 0; k < nviews; ++k) {
            ViewTerm term;
            if (k == 0) {
                term.view = scene.front_view();
                term.is_front = true;
            } else {
                Vec3 d;
                do {
                    d = Vec3(normal(rng), normal(rng), normal(rng));
                } while (d.norm() < 1e-12);
                term.view = make_viewpoint(d, scene.frame(), cfg.resolution);
            }
            if (use_sds) {
                term.t = cfg.t_min + (cfg.t_max - cfg.t_min) * uniform(rng);
                term.eps = gaussian_like(shape, rng);
            }
            terms.push_back(std::move(term));
        }

        std::fill(grad.begin(), grad.end(), 0.0);
        GradientReport report;
        try {
            report = accumulate_gradient(scene, field, terms, score, cfg, grad);
        } catch (const NumericalError& e) {
            throw NumericalError("step " + std::to_string(step) + ": " + e.what());
        }
        const double lr = cfg.lr_at(step);
        try {
            adam_step(field.params(), grad, adam, lr);
        } catch (const NumericalError& e) {
            throw NumericalError("step " + std::to_string(step) + ": " + e.what());
        }
        if (progress) progress({step, report.recon_loss, report.sds_grad_norm, lr});
    }

    OptimizeResult out;
    out.textured = scene.mesh().with_colors(field_vertex_colors(scene, field));
    out.steps = cfg.steps;
    out.field = std::move(field);
    return out;
}

std::vector<Vec3> field_vertex_colors(const TexturingScene& scene, const ColorField& field) {
    std::vector<Vec3> pts;
    pts.reserve(scene.mesh().vertex_count());
    for (const Vec3& v : scene.mesh().vertices()) pts.push_back(scene.normalizer()(v));
    return field.eval(pts);
}

}  // namespace parte
