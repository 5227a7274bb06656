#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "parte/error.hpp"
#include "parte/image.hpp"
#include "parte/mesh.hpp"
#include "parte/raster.hpp"
#include "parte/viewsphere.hpp"

namespace parte {

/// Per-vertex vote counters, one per label code.
class VoteTally {
public:
    using Counters = std::array<std::uint64_t, kLabelCount>;

    VoteTally() = default;
    explicit VoteTally(std::size_t vertex_count) : counts_(vertex_count, Counters{}) {}

    std::size_t vertex_count() const { return counts_.size(); }
    const Counters& operator[](std::size_t v) const { return counts_[v]; }
    void add(std::size_t v, std::uint8_t code, std::uint64_t n = 1) { counts_[v][code] += n; }
    std::uint64_t total(std::size_t v) const;

    VoteTally& operator+=(const VoteTally& other);
    bool operator==(const VoteTally&) const = default;

private:
    std::vector<Counters> counts_;
};

struct PartLabelField {
    std::vector<PartLabel> labels;
    /// Winning votes over total votes; 0 for vertices that received none.
    std::vector<double> confidence;
    /// True where the label came from votes rather than the fill rule.
    std::vector<bool> voted;
};

/// One vote per foreground pixel, cast for the pixel's label onto the visible
/// face's dominant-barycentric vertex. Background pixels cast nothing.
/// Throws ContractError on resolution mismatch.
void unproject_votes(const LabelMap& labels, const RenderBuffers& buffers, const Mesh& mesh, VoteTally& tally);

/// Per-vertex argmax over the five foreground counters (ties to the lowest
/// code). Vertices without votes take the label of the nearest voted vertex
/// in edge hops (breadth-first, ties to the earliest-discovered source), or
/// `others` when no voted vertex is reachable.
PartLabelField aggregate(const VoteTally& tally, const Mesh& mesh);

/// Supplies the 2D part segmentation for a view.
class LabelProvider {
public:
    struct Request {
        std::size_t view_index;
        bool is_front;
        const Viewpoint& view;
        const RenderBuffers& buffers;
    };

    virtual ~LabelProvider() = default;
    virtual LabelMap labels_for(const Request& request) = 0;
};

/// Reads `view_<index, 3 digits>.png` label maps from a directory.
class DirectoryLabelProvider final : public LabelProvider {
public:
    explicit DirectoryLabelProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
    LabelMap labels_for(const Request& request) override;

    static std::filesystem::path file_for(const std::filesystem::path& dir, std::size_t view_index);

private:
    std::filesystem::path dir_;
};

/// Routes the front view to one source and every other view to another.
class FrontSplitProvider final : public LabelProvider {
public:
    FrontSplitProvider(LabelProvider& front, LabelProvider& rest) : front_(front), rest_(rest) {}
    LabelMap labels_for(const Request& request) override {
        return request.is_front ? front_.labels_for(request) : rest_.labels_for(request);
    }

private:
    LabelProvider& front_;
    LabelProvider& rest_;
};

/// Adapts a callable.
class FunctionLabelProvider final : public LabelProvider {
public:
    using Fn = std::function<LabelMap(const Request&)>;
    explicit FunctionLabelProvider(Fn fn) : fn_(std::move(fn)) {}
    LabelMap labels_for(const Request& request) override { return fn_(request); }

private:
    Fn fn_;
};

/// Raised when a provider fails; carries the view index.
class ProviderError : public Error {
public:
    ProviderError(std::size_t view_index, const std::string& what)
        : Error("label provider failed on view " + std::to_string(view_index) + ": " + what),
          view_index_(view_index) {}
    std::size_t view_index() const { return view_index_; }

private:
    std::size_t view_index_;
};

struct SegmentOptions {
    /// Worker threads for rasterization and unprojection. Per-view tallies
    /// are summed in view order, so the result does not depend on it.
    int threads = 1;
};

struct SegmentResult {
    Mesh mesh;  ///< input mesh with vertex labels attached
    PartLabelField field;
    VoteTally tally;
};

/// Rasterize every view, obtain its label map, unproject, aggregate. View 0
/// is flagged as the front view to the provider. Normals are computed when
/// the mesh lacks them. The provider is called serially in view order.
SegmentResult segment_surface(const Mesh& mesh, const std::vector<Viewpoint>& views, LabelProvider& provider,
                              const SegmentOptions& options = {});

}  // namespace parte
