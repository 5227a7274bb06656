#include "parte/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include <nlohmann/json.hpp>

#include "parte/error.hpp"
#include "parte/image.hpp"
#include "parte/metrics.hpp"
#include "parte/oracle.hpp"
#include "parte/partvote.hpp"
#include "parte/raster.hpp"

namespace parte::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class MissingInput : public Error {
public:
    using Error::Error;
};

void log_line(std::ostream& err, const std::string& level, const std::string& msg, json extra = json::object()) {
    extra["level"] = level;
    extra["msg"] = msg;
    err << extra.dump() << '\n';
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ArgumentError(std::string("missing --") + what);
    if (!fs::exists(path)) throw MissingInput(std::string(what) + " not found: " + path);
}

void require_dir(const std::string& path, const char* what) {
    if (path.empty()) throw ArgumentError(std::string("missing --") + what);
    if (!fs::is_directory(path)) throw MissingInput(std::string(what) + " is not a directory: " + path);
}

std::string indexed_name(const char* prefix, std::size_t i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03zu%s", prefix, i, ext);
    return buf;
}

/// Drops alpha by compositing on white; expands gray to RGB.
Image to_rgb_on_white(const Image& img) {
    if (img.channels == 3) return img;
    Image out(img.width, img.height, 3);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        if (img.channels == 1) {
            for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = img.data[p];
        } else if (img.channels == 4) {
            const double a = img.data[p * 4 + 3];
            for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = a * img.data[p * 4 + c] + (1.0 - a);
        } else {
            throw ValidationError("unsupported channel count " + std::to_string(img.channels));
        }
    }
    return out;
}

fs::path default_output(const std::string& mesh, const char* suffix, const char* ext) {
    const fs::path p(mesh);
    return p.parent_path() / (p.stem().string() + suffix + ext);
}

std::unique_ptr<OracleClient> open_oracle(const RunConfig& cfg) {
    std::unique_ptr<Transport> transport;
    const auto timeout = std::chrono::milliseconds(static_cast<long long>(cfg.timeout_s * 1000.0));
    if (!cfg.replay.empty()) {
        require_file(cfg.replay, "replay");
        transport = std::make_unique<ReplayTransport>(cfg.replay);
    } else if (!cfg.oracle.empty()) {
        transport = open_transport(cfg.oracle, timeout);
    } else {
        throw ArgumentError("an oracle is required: pass --oracle or --replay");
    }
    if (!cfg.record.empty()) transport = std::make_unique<RecordingTransport>(std::move(transport), cfg.record);
    return std::make_unique<OracleClient>(std::move(transport));
}

std::vector<Viewpoint> views_for(const RunConfig& cfg, const Mesh& mesh) {
    const OrthoFrame frame = fit_frame(mesh);
    return cfg.cardinal ? cardinal_viewpoints(frame, cfg.resolution)
                        : sample_viewpoints(cfg.views, cfg.seed, frame, cfg.resolution);
}

int effective_threads(const RunConfig& cfg) { return cfg.deterministic ? 1 : std::max(1, cfg.threads); }

// ---- subcommands -----------------------------------------------------------

int cmd_render(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    require_file(cfg.mesh, "mesh");
    if (cfg.out_dir.empty()) throw ArgumentError("missing --out-dir");
    fs::create_directories(cfg.out_dir);
    Mesh mesh = load_mesh(cfg.mesh);
    if (!mesh.has_normals()) mesh = compute_vertex_normals(mesh);
    const auto views = views_for(cfg, mesh);
    json manifest = json::array();
    for (std::size_t i = 0; i < views.size(); ++i) {
        const RenderBuffers buf = rasterize(mesh, views[i]);
        const fs::path dir(cfg.out_dir);
        write_png(buf.normal_map, dir / indexed_name("normal", i, ".png"));
        write_binary_file(dir / indexed_name("depth", i, ".depth"), encode_depth(buf.depth, buf.width, buf.height));
        json entry = {{"index", i}, {"view", to_json(views[i])}};
        if (mesh.has_labels()) {
            write_label_png(labels_from_buffers(mesh, buf), dir / indexed_name("view", i, ".png"));
        }
        if (mesh.has_colors()) {
            const ColorRender cr = render_colors(mesh, mesh.colors(), views[i]);
            write_png(cr.image, dir / indexed_name("color", i, ".png"));
        }
        manifest.push_back(entry);
    }
    std::ofstream(fs::path(cfg.out_dir) / "views.json") << manifest.dump(2) << '\n';
    log_line(err, "info", "rendered views", {{"count", views.size()}, {"out_dir", cfg.out_dir}});
    out << json{{"views", views.size()}, {"out_dir", cfg.out_dir}}.dump() << '\n';
    return kOk;
}

int cmd_segment_vote(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    require_file(cfg.mesh, "mesh");
    const Mesh mesh = load_mesh(cfg.mesh);
    const auto views = views_for(cfg, mesh);

    std::unique_ptr<LabelProvider> provider;
    std::unique_ptr<OracleClient> client;
    Image front_image;
    if (!cfg.labels_dir.empty()) {
        require_dir(cfg.labels_dir, "labels-dir");
        provider = std::make_unique<DirectoryLabelProvider>(cfg.labels_dir);
    } else {
        client = open_oracle(cfg);
        const Image* front = nullptr;
        if (!cfg.image.empty()) {
            require_file(cfg.image, "image");
            front_image = to_rgb_on_white(read_png(cfg.image));
            front = &front_image;
        }
        provider = std::make_unique<OracleLabelProvider>(*client, front);
    }

    SegmentOptions opts;
    opts.threads = effective_threads(cfg);
    const SegmentResult result = segment_surface(mesh, views, *provider, opts);
    const fs::path out_path = cfg.out.empty() ? default_output(cfg.mesh, "_part", ".ply") : fs::path(cfg.out);
    save_ply(result.mesh, out_path);

    std::array<std::size_t, kLabelCount> counts{};
    std::size_t voted = 0;
    for (std::size_t v = 0; v < result.field.labels.size(); ++v) {
        ++counts[to_code(result.field.labels[v])];
        voted += result.field.voted[v];
    }
    json per_part = json::object();
    for (PartLabel l : kForegroundLabels) per_part[std::string(label_name(l))] = counts[to_code(l)];
    log_line(err, "info", "segmented surface", {{"views", views.size()}, {"voted_vertices", voted}});
    out << json{{"output", out_path.string()}, {"vertices", mesh.vertex_count()}, {"voted_vertices", voted},
                {"parts", per_part}}
               .dump()
        << '\n';
    return kOk;
}

int cmd_texture(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    require_file(cfg.mesh, "mesh");
    const Mesh mesh = load_mesh(cfg.mesh);
    SdsConfig sds = cfg.sds;
    sds.resolution = cfg.resolution;
    validate(sds);
    const int res = sds.resolution;

    Image front(res, res, 3, 1.0);
    std::vector<std::uint8_t> mask;
    if (!cfg.image.empty()) {
        require_file(cfg.image, "image");
        const Image raw = resample_nearest(read_png(cfg.image), res, res);
        front = to_rgb_on_white(raw);
        if (raw.channels == 4) {
            mask.resize(raw.pixel_count());
            for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = raw.data[p * 4 + 3] > 0.0;
        }
    } else if (sds.recon_weight > 0.0) {
        log_line(err, "warn", "no --image given; reconstruction term disabled");
        sds.recon_weight = 0.0;
    }
    if (!cfg.mask.empty()) {
        require_file(cfg.mask, "mask");
        const Image m = resample_nearest(read_png(cfg.mask), res, res);
        mask.assign(m.pixel_count(), 0);
        for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = m.data[p * m.channels] > 0.5;
    }

    std::unique_ptr<ScoreModel> score;
    std::unique_ptr<OracleClient> client;
    if (cfg.score.rfind("delta:", 0) == 0) {
        const std::string path = cfg.score.substr(6);
        require_file(path, "score image");
        score = delta_score(to_rgb_on_white(resample_nearest(read_png(path), res, res)));
    } else if (cfg.score == "oracle") {
        if (sds.sds_weight > 0.0) {
            client = open_oracle(cfg);
            score = std::make_unique<RemoteScoreModel>(*client);
        } else {
            score = delta_score(Image(res, res, 3, 1.0));
        }
    } else {
        throw ArgumentError("--score must be 'oracle' or 'delta:<png>'");
    }

    const TexturingScene scene(mesh, front, mask, res, sds.prompts);
    ColorField field = ColorField::initialize(cfg.field, sds.seed);

    std::ofstream progress_log;
    if (!cfg.log.empty()) {
        progress_log.open(cfg.log, std::ios::binary | std::ios::trunc);
        if (!progress_log) throw IoError("cannot write " + cfg.log);
    }
    const ProgressFn progress = [&](const StepRecord& r) {
        if (!progress_log.is_open()) return;
        progress_log << json{{"step", r.step}, {"recon", r.recon_loss}, {"sds_grad_norm", r.sds_grad_norm}, {"lr", r.lr}}
                            .dump()
                     << '\n';
    };
    const OptimizeResult result = optimize(scene, std::move(field), *score, sds, progress);

    const fs::path mesh_out = cfg.out.empty() ? default_output(cfg.mesh, "_tex", ".ply") : fs::path(cfg.out);
    const fs::path ckpt_out = cfg.checkpoint.empty() ? default_output(cfg.mesh, "_field", ".bin") : fs::path(cfg.checkpoint);
    save_ply(result.textured, mesh_out);
    write_binary_file(ckpt_out, save_field(result.field, result.steps));
    json summary = {{"output", mesh_out.string()}, {"checkpoint", ckpt_out.string()}, {"steps", result.steps}};
    if (!cfg.front_render.empty()) {
        const FieldRender fr = render_field(scene, result.field, scene.front_buffers());
        write_png(fr.image, cfg.front_render);
        summary["front_render"] = cfg.front_render;
    }
    log_line(err, "info", "texturing finished", {{"steps", result.steps}});
    out << summary.dump() << '\n';
    return kOk;
}

std::vector<LabelMap> read_label_views(const std::string& dir, std::size_t n) {
    std::vector<LabelMap> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(read_label_png(DirectoryLabelProvider::file_for(dir, i)));
    return out;
}

std::vector<Image> read_color_views(const std::string& dir, std::size_t n) {
    std::vector<Image> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(to_rgb_on_white(read_png(fs::path(dir) / indexed_name("color", i, ".png"))));
    }
    return out;
}

int cmd_metrics(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    require_file(cfg.pred, "pred");
    require_file(cfg.gt, "gt");
    Mesh pred = load_mesh(cfg.pred);
    Mesh gt = load_mesh(cfg.gt);
    if (cfg.samples == 0) throw ArgumentError("--samples must be >= 1");

    MetricReport r;
    const auto pred_samples = sample_surface(pred, cfg.samples, cfg.seed);
    const auto gt_samples = sample_surface(gt, cfg.samples, cfg.seed);
    r.sample_points = cfg.samples;
    r.p2s_cm = p2s(pred_samples, gt);
    r.cd_cm = chamfer(pred_samples, gt_samples);

    if (pred.has_labels() && gt.has_labels()) {
        r.part_cd = part_cd(pred, gt);
        if (pred.vertex_count() == gt.vertex_count()) {
            r.label_acc = label_acc(pred.labels(), gt.labels());
            r.compared_vertices = pred.vertex_count();
        } else {
            r.notes.push_back("label_acc skipped: meshes have different vertex sets");
        }
    } else {
        r.part_cd.absent_reason = "both meshes need part labels";
    }

    // Evaluation turntable shares the GT framing so both renders align.
    const auto views = cardinal_viewpoints(fit_frame(gt), cfg.resolution);
    if (!pred.has_normals()) pred = compute_vertex_normals(pred);
    if (!gt.has_normals()) gt = compute_vertex_normals(gt);

    std::vector<LabelMap> pred_labels, gt_labels;
    if (!cfg.pred_labels_dir.empty() && !cfg.gt_labels_dir.empty()) {
        pred_labels = read_label_views(cfg.pred_labels_dir, 4);
        gt_labels = read_label_views(cfg.gt_labels_dir, 4);
    } else if (pred.has_labels() && gt.has_labels()) {
        for (const auto& v : views) {
            pred_labels.push_back(render_labels(pred, v));
            gt_labels.push_back(render_labels(gt, v));
        }
    }
    if (!pred_labels.empty()) r.part_iou = part_iou(pred_labels, gt_labels);

    std::vector<Image> pred_images, gt_images;
    if (!cfg.pred_images_dir.empty() && !cfg.gt_images_dir.empty()) {
        pred_images = read_color_views(cfg.pred_images_dir, 4);
        gt_images = read_color_views(cfg.gt_images_dir, 4);
    } else if (pred.has_colors() && gt.has_colors()) {
        for (const auto& v : views) {
            pred_images.push_back(render_colors(pred, pred.colors(), v).image);
            gt_images.push_back(render_colors(gt, gt.colors(), v).image);
        }
    }
    if (!pred_images.empty()) {
        double sum = 0.0;
        for (std::size_t i = 0; i < pred_images.size(); ++i) {
            r.psnr_db.push_back(psnr(pred_images[i], gt_images[i]));
            sum += r.psnr_db.back();
            r.compared_pixels += pred_images[i].pixel_count();
        }
        r.psnr_mean_db = sum / static_cast<double>(pred_images.size());
    }
    r.notes.push_back("lpips unavailable: requires a pretrained perceptual network");

    const std::string text = to_json(r).dump(2);
    if (cfg.out.empty()) {
        out << text << '\n';
    } else {
        std::ofstream(cfg.out) << text << '\n';
        out << json{{"output", cfg.out}}.dump() << '\n';
    }
    log_line(err, "info", "metrics computed");
    return kOk;
}

int cmd_decompose(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    require_file(cfg.mesh, "mesh");
    if (cfg.out_dir.empty()) throw ArgumentError("missing --out-dir");
    const Mesh mesh = load_mesh(cfg.mesh);
    if (!mesh.has_labels()) throw ValidationError("decompose needs a mesh with part_label");
    fs::create_directories(cfg.out_dir);
    json parts = json::object();
    for (PartLabel l : kForegroundLabels) {
        const Mesh part = extract_part(mesh, l);
        if (part.face_count() == 0) continue;
        const fs::path path = fs::path(cfg.out_dir) / ("part_" + std::string(label_name(l)) + ".ply");
        save_ply(part, path);
        parts[std::string(label_name(l))] = {{"path", path.string()}, {"faces", part.face_count()}};
    }
    log_line(err, "info", "decomposed mesh", {{"parts", parts.size()}});
    out << json{{"parts", parts}}.dump() << '\n';
    return kOk;
}

int cmd_oracle_check(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    auto client = open_oracle(cfg);
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t id = client->ping();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out << json{{"status", "ok"}, {"id", id}, {"latency_ms", ms}}.dump() << '\n';
    return kOk;
}

std::string paper(const std::string& text, const std::string& value) {
    return text + " [paper default: " + value + "]";
}

}  // namespace

json to_json(const RunConfig& cfg) {
    return {
        {"subcommand", cfg.subcommand},
        {"views", cfg.views},
        {"resolution", cfg.resolution},
        {"seed", cfg.seed},
        {"samples", cfg.samples},
        {"threads", cfg.threads},
        {"deterministic", cfg.deterministic},
        {"timeout_s", cfg.timeout_s},
        {"sds", to_json(cfg.sds)},
        {"field",
         {{"levels", cfg.field.levels},
          {"base_resolution", cfg.field.base_resolution},
          {"max_resolution", cfg.field.max_resolution},
          {"features_per_level", cfg.field.features_per_level},
          {"log2_table_size", cfg.field.log2_table_size},
          {"hidden", cfg.field.hidden}}},
    };
}

std::optional<RunConfig> parse_args(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                                    int& exit_code) {
    RunConfig cfg;
    CLI::App app{"Part-guided mesh texturing toolkit", "parte"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.add_option("--threads", cfg.threads, "Worker threads")->capture_default_str();
    app.add_flag("--deterministic", cfg.deterministic, "Force serial execution and reductions");

    auto add_views = [&](CLI::App* sub) {
        sub->add_option("--views", cfg.views, paper("Number of viewpoints", "30"))->capture_default_str();
        sub->add_option("--resolution", cfg.resolution, "Square render resolution in pixels")->capture_default_str();
        sub->add_option("--seed", cfg.seed, "Seed (0 = canonical viewpoint lattice)")->capture_default_str();
        sub->add_flag("--cardinal", cfg.cardinal, "Use the four evaluation views (0/90/180/270 deg) instead");
    };
    auto add_oracle = [&](CLI::App* sub) {
        sub->add_option("--oracle", cfg.oracle, "Oracle endpoint: tcp://host:port or exec:<command>");
        sub->add_option("--replay", cfg.replay, "Answer oracle requests from a transcript");
        sub->add_option("--record", cfg.record, "Record oracle exchanges to a transcript");
        sub->add_option("--timeout", cfg.timeout_s, "Per-request oracle timeout in seconds")->capture_default_str();
    };

    auto* render = app.add_subcommand("render", "Render normal/label/color/depth maps for a view set");
    render->add_option("--mesh", cfg.mesh, "Input mesh (OBJ or PLY)")->required();
    render->add_option("--out-dir", cfg.out_dir, "Output directory")->required();
    add_views(render);

    auto* seg = app.add_subcommand("segment-vote", "Vote per-view part labels onto the mesh");
    seg->add_option("--mesh", cfg.mesh, "Textureless input mesh")->required();
    seg->add_option("--labels-dir", cfg.labels_dir, "Directory of view_NNN.png label maps");
    seg->add_option("--image", cfg.image, "Front input image forwarded to the oracle with the front view");
    seg->add_option("--out", cfg.out, "Output PLY with part_label (default <mesh>_part.ply)");
    add_views(seg);
    add_oracle(seg);

    auto* tex = app.add_subcommand("texture", "Optimize the surface color field");
    tex->add_option("--mesh", cfg.mesh, "Input mesh, ideally with part_label")->required();
    tex->add_option("--image", cfg.image, "Front-view input image (enables the reconstruction loss)");
    tex->add_option("--mask", cfg.mask, "Front-view foreground mask PNG (default: mesh silhouette)");
    tex->add_option("--score", cfg.score, "Score model: 'oracle' or 'delta:<png>'")->capture_default_str();
    tex->add_option("--out", cfg.out, "Textured PLY (default <mesh>_tex.ply)");
    tex->add_option("--checkpoint", cfg.checkpoint, "Field checkpoint (default <mesh>_field.bin)");
    tex->add_option("--log", cfg.log, "Progress log, one JSON record per step");
    tex->add_option("--front-render", cfg.front_render, "Write the final front-view field render (PNG)");
    tex->add_option("--config", cfg.config_file, "JSON file of SDS settings; explicit flags take precedence");
    auto* o_steps = tex->add_option("--steps", cfg.sds.steps, paper("Optimization steps", "4000"))->capture_default_str();
    auto* o_batch = tex->add_option("--batch", cfg.sds.batch, paper("Views per step (front included)", "4"))->capture_default_str();
    auto* o_cfg = tex->add_option("--cfg", cfg.sds.cfg_scale, paper("Classifier-free guidance scale", "100"))->capture_default_str();
    auto* o_tmin = tex->add_option("--t-min", cfg.sds.t_min, paper("Lowest noise level", "0.02"))->capture_default_str();
    auto* o_tmax = tex->add_option("--t-max", cfg.sds.t_max, paper("Highest noise level", "0.98"))->capture_default_str();
    auto* o_lr = tex->add_option("--lr", cfg.sds.lr, paper("Initial Adam learning rate", "0.01"))->capture_default_str();
    auto* o_decay = tex->add_option("--lr-decay", cfg.sds.lr_decay, "Per-step learning-rate factor (0.1 over 4000 steps)")->capture_default_str();
    auto* o_recon = tex->add_option("--recon-weight", cfg.sds.recon_weight, "Weight of the reconstruction loss")->capture_default_str();
    auto* o_sdsw = tex->add_option("--sds-weight", cfg.sds.sds_weight, "Weight of the score-distillation loss")->capture_default_str();
    auto* o_prompt = tex->add_option("--prompt", cfg.sds.prompts, "Part prompt forwarded to the score model (repeatable)");
    tex->add_option("--resolution", cfg.resolution, "Square render resolution in pixels")->capture_default_str();
    auto* o_seed = tex->add_option("--seed", cfg.sds.seed, "Optimization seed")->capture_default_str();
    tex->add_option("--hash-levels", cfg.field.levels, "Hash-grid levels")->capture_default_str();
    tex->add_option("--hash-base", cfg.field.base_resolution, "Coarsest hash-grid resolution")->capture_default_str();
    tex->add_option("--hash-max", cfg.field.max_resolution, paper("Finest hash-grid resolution", "2048"))->capture_default_str();
    tex->add_option("--hash-features", cfg.field.features_per_level, "Features per hash level")->capture_default_str();
    tex->add_option("--hash-log2-table", cfg.field.log2_table_size, "log2 of hash entries per level")->capture_default_str();
    tex->add_option("--hidden", cfg.field.hidden, paper("MLP hidden width", "32"))->capture_default_str();
    add_oracle(tex);

    auto* met = app.add_subcommand("metrics", "Compare a prediction against ground truth");
    met->add_option("--pred", cfg.pred, "Predicted mesh")->required();
    met->add_option("--gt", cfg.gt, "Ground-truth mesh")->required();
    met->add_option("--samples", cfg.samples, "Surface samples for P2S/CD")->capture_default_str();
    met->add_option("--seed", cfg.seed, "Sampling seed")->capture_default_str();
    met->add_option("--resolution", cfg.resolution, "Evaluation render resolution")->capture_default_str();
    met->add_option("--pred-labels-dir", cfg.pred_labels_dir, "Predicted cardinal label maps view_000..003.png");
    met->add_option("--gt-labels-dir", cfg.gt_labels_dir, "Ground-truth cardinal label maps");
    met->add_option("--pred-images-dir", cfg.pred_images_dir, "Predicted cardinal renders color_000..003.png");
    met->add_option("--gt-images-dir", cfg.gt_images_dir, "Ground-truth cardinal renders");
    met->add_option("--out", cfg.out, "Write the JSON report here instead of stdout");

    auto* dec = app.add_subcommand("decompose", "Split a labeled mesh into per-part meshes");
    dec->add_option("--mesh", cfg.mesh, "Mesh with part_label")->required();
    dec->add_option("--out-dir", cfg.out_dir, "Output directory")->required();

    auto* chk = app.add_subcommand("oracle-check", "Ping the oracle service");
    add_oracle(chk);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        exit_code = app.exit(e, out, err);
        if (exit_code != 0) {
            exit_code = kUsage;
            err << json{{"error", e.what()}, {"exit_code", kUsage}}.dump() << '\n';
        }
        return std::nullopt;
    }
    cfg.subcommand = app.get_subcommands().front()->get_name();

    if (cfg.subcommand == "texture" && !cfg.config_file.empty()) {
        if (!fs::exists(cfg.config_file)) {
            exit_code = kMissingInput;
            err << json{{"error", "config not found: " + cfg.config_file}, {"exit_code", kMissingInput}}.dump() << '\n';
            return std::nullopt;
        }
        try {
            std::ifstream in(cfg.config_file);
            const SdsConfig from_file = sds_config_from_json(json::parse(in));
            SdsConfig merged = from_file;
            if (o_steps->count()) merged.steps = cfg.sds.steps;
            if (o_batch->count()) merged.batch = cfg.sds.batch;
            if (o_cfg->count()) merged.cfg_scale = cfg.sds.cfg_scale;
            if (o_tmin->count()) merged.t_min = cfg.sds.t_min;
            if (o_tmax->count()) merged.t_max = cfg.sds.t_max;
            if (o_lr->count()) merged.lr = cfg.sds.lr;
            if (o_decay->count()) merged.lr_decay = cfg.sds.lr_decay;
            if (o_recon->count()) merged.recon_weight = cfg.sds.recon_weight;
            if (o_sdsw->count()) merged.sds_weight = cfg.sds.sds_weight;
            if (o_prompt->count()) merged.prompts = cfg.sds.prompts;
            if (o_seed->count()) merged.seed = cfg.sds.seed;
            cfg.sds = merged;
        } catch (const std::exception& e) {
            exit_code = kBadInput;
            err << json{{"error", std::string("bad config: ") + e.what()}, {"exit_code", kBadInput}}.dump() << '\n';
            return std::nullopt;
        }
    }
    exit_code = kOk;
    return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    int code = kOk;
    const auto cfg = parse_args(args, out, err, code);
    if (!cfg) return code;

    auto fail = [&](int exit_code, const std::string& what) {
        err << json{{"error", what}, {"exit_code", exit_code}}.dump() << '\n';
        return exit_code;
    };
    try {
        const std::string& sub = cfg->subcommand;
        if (sub == "render") return cmd_render(*cfg, out, err);
        if (sub == "segment-vote") return cmd_segment_vote(*cfg, out, err);
        if (sub == "texture") return cmd_texture(*cfg, out, err);
        if (sub == "metrics") return cmd_metrics(*cfg, out, err);
        if (sub == "decompose") return cmd_decompose(*cfg, out, err);
        if (sub == "oracle-check") return cmd_oracle_check(*cfg, out, err);
        return fail(kUsage, "unknown subcommand " + sub);
    } catch (const MissingInput& e) {
        return fail(kMissingInput, e.what());
    } catch (const ArgumentError& e) {
        return fail(kUsage, e.what());
    } catch (const OracleError& e) {
        const bool down = e.kind() == OracleError::Kind::unreachable || e.kind() == OracleError::Kind::timeout;
        return fail(down ? kOracleUnreachable : kOracleProtocol, e.what());
    } catch (const ProviderError& e) {
        return fail(kOracleProtocol, e.what());
    } catch (const ScoreModelError& e) {
        return fail(kOracleProtocol, e.what());
    } catch (const NumericalError& e) {
        return fail(kNumerical, e.what());
    } catch (const FormatError& e) {
        return fail(kBadInput, e.what());
    } catch (const ValidationError& e) {
        return fail(kBadInput, e.what());
    } catch (const IoError& e) {
        return fail(kMissingInput, e.what());
    } catch (const std::exception& e) {
        return fail(kInternal, e.what());
    }
}

}  // namespace parte::cli
