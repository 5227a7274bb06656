#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "parte/image.hpp"
#include "parte/mesh.hpp"

namespace parte {

/// Closest point of triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Static bounding-volume hierarchy over a mesh's triangles for exact
/// point-to-surface distance queries.
class TriangleBvh {
public:
    explicit TriangleBvh(const Mesh& mesh);
    /// Distance from p to the nearest triangle; +inf for a mesh without faces.
    double distance(const Vec3& p) const;

private:
    struct Node {
        Vec3 lo, hi;
        std::uint32_t begin, end;  // leaf range into order_ when left == 0
        std::uint32_t left = 0, right = 0;
    };
    std::uint32_t build(std::uint32_t begin, std::uint32_t end);

    const Mesh* mesh_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
    std::vector<Vec3> centroids_;
};

/// k-d tree over a point set for nearest-neighbor distance.
class PointKdTree {
public:
    explicit PointKdTree(std::span<const Vec3> points);
    double nearest_distance(const Vec3& q) const;

private:
    struct Node {
        std::uint32_t point;
        std::int32_t left = -1, right = -1;
        std::uint8_t axis = 0;
    };
    std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);
    void search(std::int32_t node, const Vec3& q, double& best2) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> index_;
    std::vector<Node> nodes_;
};

/// Mean exact point-to-triangle distance from `points` to `surface`.
/// Throws ArgumentError when either side is empty.
double p2s(std::span<const Vec3> points, const Mesh& surface);

/// 0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|). Throws ArgumentError on an empty set.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Area-uniform surface samples, deterministic for a fixed seed.
std::vector<Vec3> sample_surface(const Mesh& mesh, std::size_t count, std::uint64_t seed);

struct PartCdResult {
    std::optional<double> value;               ///< nullopt when no part is common to both
    std::vector<PartLabel> compared;
    std::vector<PartLabel> only_in_pred;
    std::vector<PartLabel> only_in_gt;
    std::string absent_reason;
};

/// Mean over the foreground parts present in both meshes of the chamfer
/// distance between that part's vertex sets.
PartCdResult part_cd(const Mesh& pred, const Mesh& gt);

/// Per view and per foreground part present in either map: IoU of the two
/// binary masks; averaged over parts, then over views. Views with no
/// foreground part in either map are skipped; when every view is skipped the
/// maps agree trivially and the result is 1. Throws ContractError on count or
/// resolution mismatch.
double part_iou(std::span<const LabelMap> pred_views, std::span<const LabelMap> gt_views);

/// Fraction of equal labels. Throws ContractError on length mismatch or empty input.
double label_acc(std::span<const PartLabel> pred, std::span<const PartLabel> gt);

inline constexpr double kPsnrCapDb = 99.0;

/// 10 log10(peak^2 / MSE) over every pixel and channel, capped at 99 dB.
double psnr(const Image& a, const Image& b, double peak = 1.0);

struct MetricReport {
    std::optional<double> p2s_cm;
    std::optional<double> cd_cm;
    PartCdResult part_cd;
    std::optional<double> part_iou;
    std::optional<double> label_acc;
    std::vector<double> psnr_db;
    std::optional<double> psnr_mean_db;
    std::size_t sample_points = 0;
    std::size_t compared_vertices = 0;
    std::size_t compared_pixels = 0;
    std::vector<std::string> notes;
};

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

}  // namespace parte
