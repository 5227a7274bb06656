#include "parte/partvote.hpp"

#include <cstdio>
#include <deque>
#include <thread>

#include "parte/error.hpp"

namespace parte {

std::uint64_t VoteTally::total(std::size_t v) const {
    std::uint64_t t = 0;
    for (auto c : counts_[v]) t += c;
    return t;
}

VoteTally& VoteTally::operator+=(const VoteTally& other) {
    if (other.counts_.size() != counts_.size()) throw ContractError("tally sizes differ");
    for (std::size_t v = 0; v < counts_.size(); ++v) {
        for (int k = 0; k < kLabelCount; ++k) counts_[v][k] += other.counts_[v][k];
    }
    return *this;
}

void unproject_votes(const LabelMap& labels, const RenderBuffers& buffers, const Mesh& mesh, VoteTally& tally) {
    if (labels.width != buffers.width || labels.height != buffers.height) {
        throw ContractError("unproject_votes: label map " + std::to_string(labels.width) + "x" +
                            std::to_string(labels.height) + " vs buffers " + std::to_string(buffers.width) +
                            "x" + std::to_string(buffers.height));
    }
    if (tally.vertex_count() != mesh.vertex_count()) throw ContractError("unproject_votes: tally/mesh size mismatch");
    for (std::size_t p = 0; p < buffers.pixel_count(); ++p) {
        const std::uint8_t code = labels.codes[p];
        if (!buffers.mask[p] || code == to_code(PartLabel::background)) continue;
        if (!is_valid_label_code(code)) throw ValidationError("label code outside 0..5 at pixel " + std::to_string(p));
        tally.add(dominant_vertex(mesh, buffers, p), code);
    }
}

PartLabelField aggregate(const VoteTally& tally, const Mesh& mesh) {
    const std::size_t n = tally.vertex_count();
    if (n != mesh.vertex_count()) throw ContractError("aggregate: tally/mesh size mismatch");
    PartLabelField out;
    out.labels.assign(n, PartLabel::others);
    out.confidence.assign(n, 0.0);
    out.voted.assign(n, false);

    std::deque<std::uint32_t> frontier;
    for (std::size_t v = 0; v < n; ++v) {
        const auto& c = tally[v];
        int best = 0;
        for (int k = 1; k < kLabelCount; ++k) {
            if (c[k] > 0 && (best == 0 || c[k] > c[best])) best = k;
        }
        if (best == 0) continue;
        out.labels[v] = static_cast<PartLabel>(best);
        out.confidence[v] = static_cast<double>(c[best]) / static_cast<double>(tally.total(v));
        out.voted[v] = true;
        frontier.push_back(static_cast<std::uint32_t>(v));
    }

    // Multi-source BFS over mesh edges for vertices no view saw.
    std::vector<std::vector<std::uint32_t>> adjacency(n);
    for (const Face& f : mesh.faces()) {
        for (int k = 0; k < 3; ++k) {
            adjacency[f[k]].push_back(f[(k + 1) % 3]);
            adjacency[f[k]].push_back(f[(k + 2) % 3]);
        }
    }
    std::vector<bool> reached = out.voted;
    while (!frontier.empty()) {
        const std::uint32_t v = frontier.front();
        frontier.pop_front();
        for (auto u : adjacency[v]) {
            if (reached[u]) continue;
            reached[u] = true;
            out.labels[u] = out.labels[v];
            frontier.push_back(u);
        }
    }
    return out;
}

std::filesystem::path DirectoryLabelProvider::file_for(const std::filesystem::path& dir, std::size_t view_index) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03zu.png", view_index);
    return dir / name;
}

LabelMap DirectoryLabelProvider::labels_for(const Request& request) {
    return read_label_png(file_for(dir_, request.view_index));
}

SegmentResult segment_surface(const Mesh& input, const std::vector<Viewpoint>& views, LabelProvider& provider,
                              const SegmentOptions& options) {
    if (views.empty()) throw ArgumentError("segment_surface needs at least one view");
    const Mesh mesh = input.has_normals() ? input : compute_vertex_normals(input);

    const std::size_t nviews = views.size();
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(options.threads, nviews));
    VoteTally tally(mesh.vertex_count());
    // Views are rendered in batches of `workers` to bound buffer memory.
    std::vector<RenderBuffers> buffers(workers);
    for (std::size_t batch = 0; batch < nviews; batch += workers) {
        const std::size_t count = std::min(workers, nviews - batch);
        if (count == 1) {
            buffers[0] = rasterize(mesh, views[batch]);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < count; ++w) {
                pool.emplace_back([&, w] { buffers[w] = rasterize(mesh, views[batch + w]); });
            }
            for (auto& t : pool) t.join();
        }
        for (std::size_t w = 0; w < count; ++w) {
            const std::size_t i = batch + w;
            LabelMap labels;
            try {
                labels = provider.labels_for({i, i == 0, views[i], buffers[w]});
            } catch (const ProviderError&) {
                throw;
            } catch (const std::exception& e) {
                throw ProviderError(i, e.what());
            }
            VoteTally view_tally(mesh.vertex_count());
            unproject_votes(labels, buffers[w], mesh, view_tally);
            tally += view_tally;
        }
    }

    PartLabelField field = aggregate(tally, mesh);
    Mesh labeled = mesh.with_labels(field.labels);
    return {std::move(labeled), std::move(field), std::move(tally)};
}

}  // namespace parte
