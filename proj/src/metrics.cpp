#include "parte/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "parte/error.hpp"

namespace parte {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace {

double box_distance2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
    const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    return d.squaredNorm();
}

constexpr std::uint32_t kLeafSize = 4;

}  // namespace

TriangleBvh::TriangleBvh(const Mesh& mesh) : mesh_(&mesh) {
    const std::size_t n = mesh.face_count();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    centroids_.resize(n);
    for (std::size_t f = 0; f < n; ++f) {
        const Face& face = mesh.faces()[f];
        centroids_[f] = (mesh.vertices()[face[0]] + mesh.vertices()[face[1]] + mesh.vertices()[face[2]]) / 3.0;
    }
    if (n > 0) {
        nodes_.reserve(2 * n / kLeafSize + 2);
        build(0, static_cast<std::uint32_t>(n));
    }
}

std::uint32_t TriangleBvh::build(std::uint32_t begin, std::uint32_t end) {
    const auto idx = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    Vec3 clo = lo, chi = hi;
    for (std::uint32_t i = begin; i < end; ++i) {
        const Face& f = mesh_->faces()[order_[i]];
        for (auto v : f) {
            lo = lo.cwiseMin(mesh_->vertices()[v]);
            hi = hi.cwiseMax(mesh_->vertices()[v]);
        }
        clo = clo.cwiseMin(centroids_[order_[i]]);
        chi = chi.cwiseMax(centroids_[order_[i]]);
    }
    nodes_[idx].lo = lo;
    nodes_[idx].hi = hi;
    nodes_[idx].begin = begin;
    nodes_[idx].end = end;
    if (end - begin <= kLeafSize) return idx;

    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         if (centroids_[a][axis] != centroids_[b][axis]) return centroids_[a][axis] < centroids_[b][axis];
                         return a < b;
                     });
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
}

double TriangleBvh::distance(const Vec3& p) const {
    if (nodes_.empty()) return std::numeric_limits<double>::infinity();
    double best2 = std::numeric_limits<double>::infinity();
    std::vector<std::uint32_t> stack = {0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (box_distance2(p, node.lo, node.hi) >= best2) continue;
        if (node.left == 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const Face& f = mesh_->faces()[order_[i]];
                const Vec3 q = closest_point_on_triangle(p, mesh_->vertices()[f[0]], mesh_->vertices()[f[1]],
                                                         mesh_->vertices()[f[2]]);
                best2 = std::min(best2, (q - p).squaredNorm());
            }
            continue;
        }
        const double dl = box_distance2(p, nodes_[node.left].lo, nodes_[node.left].hi);
        const double dr = box_distance2(p, nodes_[node.right].lo, nodes_[node.right].hi);
        // Visit the nearer child first (pushed last).
        if (dl < dr) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return std::sqrt(best2);
}

PointKdTree::PointKdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    index_.resize(points_.size());
    std::iota(index_.begin(), index_.end(), 0u);
    nodes_.reserve(points_.size());
    if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()), 0);
}

std::int32_t PointKdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
    if (begin >= end) return -1;
    const int axis = depth % 3;
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                         return a < b;
                     });
    const auto node = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({index_[mid], -1, -1, static_cast<std::uint8_t>(axis)});
    const std::int32_t left = build(begin, mid, depth + 1);
    const std::int32_t right = build(mid + 1, end, depth + 1);
    nodes_[node].left = left;
    nodes_[node].right = right;
    return node;
}

void PointKdTree::search(std::int32_t node, const Vec3& q, double& best2) const {
    while (node >= 0) {
        const Node& n = nodes_[node];
        const Vec3& p = points_[n.point];
        best2 = std::min(best2, (p - q).squaredNorm());
        const double diff = q[n.axis] - p[n.axis];
        const std::int32_t near = diff < 0 ? n.left : n.right;
        const std::int32_t far = diff < 0 ? n.right : n.left;
        if (far >= 0 && diff * diff < best2) search(far, q, best2);
        node = near;
    }
}

double PointKdTree::nearest_distance(const Vec3& q) const {
    if (nodes_.empty()) return std::numeric_limits<double>::infinity();
    double best2 = std::numeric_limits<double>::infinity();
    search(0, q, best2);
    return std::sqrt(best2);
}

double p2s(std::span<const Vec3> points, const Mesh& surface) {
    if (points.empty()) throw ArgumentError("p2s needs at least one point");
    if (surface.face_count() == 0) throw ArgumentError("p2s needs a non-empty surface");
    const TriangleBvh bvh(surface);
    double sum = 0.0;
    for (const Vec3& p : points) sum += bvh.distance(p);
    return sum / static_cast<double>(points.size());
}

namespace {

double directed_mean(std::span<const Vec3> from, const PointKdTree& to) {
    double sum = 0.0;
    for (const Vec3& p : from) sum += to.nearest_distance(p);
    return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw ArgumentError("chamfer needs two non-empty point sets");
    const PointKdTree ta(a), tb(b);
    return 0.5 * (directed_mean(a, tb) + directed_mean(b, ta));
}

std::vector<Vec3> sample_surface(const Mesh& mesh, std::size_t count, std::uint64_t seed) {
    if (mesh.face_count() == 0) throw ArgumentError("cannot sample an empty surface");
    std::vector<double> cdf(mesh.face_count());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        total += mesh.face_area(f);
        cdf[f] = total;
    }
    if (!(total > 0.0)) throw ArgumentError("cannot sample a zero-area surface");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double r = u(rng) * total;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
        const std::size_t f = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
        double s = u(rng), t = u(rng);
        if (s + t > 1.0) {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        const Face& face = mesh.faces()[f];
        const Vec3& a = mesh.vertices()[face[0]];
        out.push_back(a + s * (mesh.vertices()[face[1]] - a) + t * (mesh.vertices()[face[2]] - a));
    }
    return out;
}

namespace {

std::vector<Vec3> part_vertices(const Mesh& m, PartLabel part) {
    std::vector<Vec3> out;
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
        if (m.labels()[v] == part) out.push_back(m.vertices()[v]);
    }
    return out;
}

}  // namespace

PartCdResult part_cd(const Mesh& pred, const Mesh& gt) {
    if (!pred.has_labels() || !gt.has_labels()) throw ContractError("part_cd needs labeled meshes");
    PartCdResult r;
    double sum = 0.0;
    for (PartLabel part : kForegroundLabels) {
        const auto a = part_vertices(pred, part);
        const auto b = part_vertices(gt, part);
        if (a.empty() && b.empty()) continue;
        if (a.empty()) { r.only_in_gt.push_back(part); continue; }
        if (b.empty()) { r.only_in_pred.push_back(part); continue; }
        sum += chamfer(a, b);
        r.compared.push_back(part);
    }
    if (r.compared.empty()) {
        r.absent_reason = "no foreground part is present in both meshes";
    } else {
        r.value = sum / static_cast<double>(r.compared.size());
    }
    return r;
}

double part_iou(std::span<const LabelMap> pred_views, std::span<const LabelMap> gt_views) {
    if (pred_views.size() != gt_views.size()) throw ContractError("part_iou: view counts differ");
    double view_sum = 0.0;
    std::size_t scored_views = 0;
    for (std::size_t v = 0; v < pred_views.size(); ++v) {
        const LabelMap& a = pred_views[v];
        const LabelMap& b = gt_views[v];
        if (a.width != b.width || a.height != b.height) throw ContractError("part_iou: resolutions differ");
        std::array<std::size_t, kLabelCount> inter{}, uni{};
        for (std::size_t p = 0; p < a.codes.size(); ++p) {
            const auto ca = a.codes[p], cb = b.codes[p];
            if (ca == cb) {
                ++inter[ca];
                ++uni[ca];
            } else {
                ++uni[ca];
                ++uni[cb];
            }
        }
        double part_sum = 0.0;
        int parts = 0;
        for (int k = 1; k < kLabelCount; ++k) {
            if (uni[k] == 0) continue;
            part_sum += static_cast<double>(inter[k]) / static_cast<double>(uni[k]);
            ++parts;
        }
        if (parts == 0) continue;
        view_sum += part_sum / parts;
        ++scored_views;
    }
    return scored_views == 0 ? 1.0 : view_sum / static_cast<double>(scored_views);
}

double label_acc(std::span<const PartLabel> pred, std::span<const PartLabel> gt) {
    if (pred.size() != gt.size()) throw ContractError("label_acc: label counts differ");
    if (pred.empty()) throw ContractError("label_acc: no labels to compare");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == gt[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double psnr(const Image& a, const Image& b, double peak) {
    require_same_shape(a, b, "psnr");
    if (a.size() == 0) throw ContractError("psnr: empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> get_opt(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

nlohmann::json label_list(const std::vector<PartLabel>& ls) {
    auto out = nlohmann::json::array();
    for (auto l : ls) out.push_back(std::string(label_name(l)));
    return out;
}

std::vector<PartLabel> label_list_from(const nlohmann::json& j) {
    std::vector<PartLabel> out;
    for (const auto& s : j) {
        auto l = label_from_name(s.get<std::string>());
        if (!l) throw ValidationError("unknown part name in report");
        out.push_back(*l);
    }
    return out;
}

}  // namespace

nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json pcd = {
        {"value_cm", opt(r.part_cd.value)},
        {"compared", label_list(r.part_cd.compared)},
        {"only_in_pred", label_list(r.part_cd.only_in_pred)},
        {"only_in_gt", label_list(r.part_cd.only_in_gt)},
    };
    if (!r.part_cd.absent_reason.empty()) pcd["absent_reason"] = r.part_cd.absent_reason;
    return {
        {"p2s_cm", opt(r.p2s_cm)},
        {"cd_cm", opt(r.cd_cm)},
        {"part_cd_cm", opt(r.part_cd.value)},
        {"part_cd", pcd},
        {"part_iou", opt(r.part_iou)},
        {"label_acc", opt(r.label_acc)},
        {"psnr_db", r.psnr_db},
        {"psnr_mean_db", opt(r.psnr_mean_db)},
        {"lpips", {{"available", false}, {"reason", "requires a pretrained perceptual network"}}},
        {"counts", {{"sample_points", r.sample_points}, {"compared_vertices", r.compared_vertices},
                    {"compared_pixels", r.compared_pixels}}},
        {"notes", r.notes},
    };
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
    try {
        MetricReport r;
        r.p2s_cm = get_opt(j, "p2s_cm");
        r.cd_cm = get_opt(j, "cd_cm");
        const auto& pcd = j.at("part_cd");
        r.part_cd.value = get_opt(pcd, "value_cm");
        r.part_cd.compared = label_list_from(pcd.at("compared"));
        r.part_cd.only_in_pred = label_list_from(pcd.at("only_in_pred"));
        r.part_cd.only_in_gt = label_list_from(pcd.at("only_in_gt"));
        if (pcd.contains("absent_reason")) r.part_cd.absent_reason = pcd.at("absent_reason").get<std::string>();
        r.part_iou = get_opt(j, "part_iou");
        r.label_acc = get_opt(j, "label_acc");
        r.psnr_db = j.at("psnr_db").get<std::vector<double>>();
        r.psnr_mean_db = get_opt(j, "psnr_mean_db");
        const auto& c = j.at("counts");
        r.sample_points = c.at("sample_points").get<std::size_t>();
        r.compared_vertices = c.at("compared_vertices").get<std::size_t>();
        r.compared_pixels = c.at("compared_pixels").get<std::size_t>();
        r.notes = j.at("notes").get<std::vector<std::string>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad metric report: ") + e.what());
    }
}

}  // namespace parte
