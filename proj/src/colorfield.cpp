#include "parte/colorfield.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include "parte/error.hpp"

namespace parte {

namespace {

double squash(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void validate(const ColorFieldConfig& c) {
    if (c.levels < 1 || c.levels > 64) throw ArgumentError("levels must lie in 1..64");
    if (c.base_resolution < 1) throw ArgumentError("base_resolution must be >= 1");
    if (c.features_per_level < 1 || c.features_per_level > 8) throw ArgumentError("features_per_level must lie in 1..8");
    if (c.log2_table_size < 1 || c.log2_table_size > 24) throw ArgumentError("log2_table_size must lie in 1..24");
    if (c.hidden < 1) throw ArgumentError("hidden must be >= 1");
    if (c.levels > 1 && c.max_resolution <= c.base_resolution) {
        throw ArgumentError("max_resolution must exceed base_resolution");
    }
}

}  // namespace

FieldLayout FieldLayout::of(const ColorFieldConfig& cfg) {
    FieldLayout l;
    l.table_size = std::size_t{1} << cfg.log2_table_size;
    l.input_dim = static_cast<std::size_t>(cfg.levels) * cfg.features_per_level;
    l.tables = 0;
    l.w1 = l.tables + static_cast<std::size_t>(cfg.levels) * l.table_size * cfg.features_per_level;
    l.b1 = l.w1 + static_cast<std::size_t>(cfg.hidden) * l.input_dim;
    l.w2 = l.b1 + cfg.hidden;
    l.b2 = l.w2 + 3 * static_cast<std::size_t>(cfg.hidden);
    l.total = l.b2 + 3;
    return l;
}

std::vector<int> level_resolutions(const ColorFieldConfig& cfg) {
    validate(cfg);
    std::vector<int> res(cfg.levels);
    if (cfg.levels == 1) {
        res[0] = cfg.max_resolution;
        return res;
    }
    const double growth = std::exp((std::log(cfg.max_resolution) - std::log(cfg.base_resolution)) / (cfg.levels - 1));
    for (int l = 0; l < cfg.levels; ++l) {
        res[l] = l == cfg.levels - 1 ? cfg.max_resolution
                                     : static_cast<int>(std::floor(cfg.base_resolution * std::pow(growth, l)));
    }
    for (int l = 1; l < cfg.levels; ++l) {
        if (res[l] <= res[l - 1]) throw ArgumentError("level resolutions are not strictly increasing");
    }
    return res;
}

ColorField ColorField::zeros(const ColorFieldConfig& cfg) {
    ColorField f;
    f.resolutions_ = level_resolutions(cfg);
    f.cfg_ = cfg;
    f.layout_ = FieldLayout::of(cfg);
    f.params_.assign(f.layout_.total, 0.0);
    return f;
}

ColorField ColorField::initialize(const ColorFieldConfig& cfg, std::uint64_t seed) {
    ColorField f = zeros(cfg);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> feat(-1e-4, 1e-4);
    for (std::size_t i = f.layout_.tables; i < f.layout_.w1; ++i) f.params_[i] = feat(rng);
    const double bound = std::sqrt(6.0 / static_cast<double>(f.layout_.input_dim));
    std::uniform_real_distribution<double> he(-bound, bound);
    for (std::size_t i = f.layout_.w1; i < f.layout_.b1; ++i) f.params_[i] = he(rng);
    return f;
}

std::uint32_t ColorField::table_index(int level, std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
    const std::uint64_t side = static_cast<std::uint64_t>(resolutions_[level]) + 1;
    const std::uint64_t mask = layout_.table_size - 1;
    if (side * side * side <= layout_.table_size) {
        return static_cast<std::uint32_t>(x + side * (y + side * z));
    }
    const std::uint32_t h = x ^ (y * 2654435761u) ^ (z * 805459861u);
    return static_cast<std::uint32_t>(h & mask);
}

struct ColorField::Corners {
    std::array<std::uint32_t, 8> index;
    std::array<double, 8> weight;
};

void ColorField::encode(const Vec3& p, std::vector<double>& features, std::vector<Corners>* corners,
                        EvalStats* stats) const {
    Vec3 q = p;
    bool clamped = false;
    for (int k = 0; k < 3; ++k) {
        if (!(q[k] >= 0.0 && q[k] <= 1.0)) {
            q[k] = std::isnan(q[k]) ? 0.0 : std::clamp(q[k], 0.0, 1.0);
            clamped = true;
        }
    }
    if (stats) {
        ++stats->points;
        if (clamped) ++stats->clamped;
    }
    const int F = cfg_.features_per_level;
    features.assign(layout_.input_dim, 0.0);
    for (int l = 0; l < cfg_.levels; ++l) {
        const int res = resolutions_[l];
        std::array<std::uint32_t, 3> cell;
        std::array<double, 3> frac;
        for (int k = 0; k < 3; ++k) {
            const double pos = q[k] * res;
            const int c = std::min(static_cast<int>(std::floor(pos)), res - 1);
            cell[k] = static_cast<std::uint32_t>(c);
            frac[k] = pos - c;
        }
        Corners local;
        const double* table = params_.data() + layout_.tables + static_cast<std::size_t>(l) * layout_.table_size * F;
        for (int c = 0; c < 8; ++c) {
            const std::uint32_t dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
            const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                             (dz ? frac[2] : 1.0 - frac[2]);
            const std::uint32_t idx = table_index(l, cell[0] + dx, cell[1] + dy, cell[2] + dz);
            local.index[c] = idx;
            local.weight[c] = w;
            for (int f = 0; f < F; ++f) features[l * F + f] += w * table[static_cast<std::size_t>(idx) * F + f];
        }
        if (corners) (*corners)[l] = local;
    }
}

Vec3 ColorField::eval(const Vec3& point, EvalStats* stats) const {
    std::vector<double> feat;
    encode(point, feat, nullptr, stats);
    const std::size_t in = layout_.input_dim;
    const int H = cfg_.hidden;
    const double* w1 = params_.data() + layout_.w1;
    const double* b1 = params_.data() + layout_.b1;
    const double* w2 = params_.data() + layout_.w2;
    const double* b2 = params_.data() + layout_.b2;
    std::array<double, 3> out = {b2[0], b2[1], b2[2]};
    for (int j = 0; j < H; ++j) {
        double a = b1[j];
        for (std::size_t i = 0; i < in; ++i) a += w1[j * in + i] * feat[i];
        if (a <= 0.0) continue;
        for (int c = 0; c < 3; ++c) out[c] += w2[c * H + j] * a;
    }
    return {squash(out[0]), squash(out[1]), squash(out[2])};
}

std::vector<Vec3> ColorField::eval(std::span<const Vec3> points, EvalStats* stats) const {
    std::vector<Vec3> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = eval(points[i], stats);
    return out;
}

void ColorField::eval_with_grad(std::span<const Vec3> points, std::span<const Vec3> upstream, std::span<double> grad,
                                std::vector<Vec3>* rgb_out, EvalStats* stats) const {
    if (upstream.size() != points.size()) throw ContractError("eval_with_grad: upstream size differs from point count");
    if (grad.size() != params_.size()) throw ContractError("eval_with_grad: gradient buffer has wrong size");
    for (const Vec3& u : upstream) {
        if (!u.allFinite()) throw ContractError("eval_with_grad: non-finite upstream gradient");
    }
    if (rgb_out) rgb_out->resize(points.size());

    const std::size_t in = layout_.input_dim;
    const int H = cfg_.hidden;
    const int F = cfg_.features_per_level;
    const double* w1 = params_.data() + layout_.w1;
    const double* b1 = params_.data() + layout_.b1;
    const double* w2 = params_.data() + layout_.w2;
    const double* b2 = params_.data() + layout_.b2;
    double* g_tables = grad.data() + layout_.tables;
    double* g_w1 = grad.data() + layout_.w1;
    double* g_b1 = grad.data() + layout_.b1;
    double* g_w2 = grad.data() + layout_.w2;
    double* g_b2 = grad.data() + layout_.b2;

    std::vector<double> feat;
    std::vector<Corners> corners(cfg_.levels);
    std::vector<double> hidden(H), d_hidden(H), d_feat(in);

    for (std::size_t i = 0; i < points.size(); ++i) {
        encode(points[i], feat, &corners, stats);
        std::array<double, 3> out = {b2[0], b2[1], b2[2]};
        for (int j = 0; j < H; ++j) {
            double a = b1[j];
            for (std::size_t k = 0; k < in; ++k) a += w1[j * in + k] * feat[k];
            hidden[j] = a > 0.0 ? a : 0.0;
            for (int c = 0; c < 3; ++c) out[c] += w2[c * H + j] * hidden[j];
        }
        std::array<double, 3> d_out;
        for (int c = 0; c < 3; ++c) {
            const double s = squash(out[c]);
            if (rgb_out) (*rgb_out)[i][c] = s;
            d_out[c] = upstream[i][c] * std::max(s * (1.0 - s), kSquashSlopeFloor);
        }
        if (d_out[0] == 0.0 && d_out[1] == 0.0 && d_out[2] == 0.0) continue;

        for (int c = 0; c < 3; ++c) g_b2[c] += d_out[c];
        for (int j = 0; j < H; ++j) {
            double dh = 0.0;
            for (int c = 0; c < 3; ++c) {
                g_w2[c * H + j] += d_out[c] * hidden[j];
                dh += w2[c * H + j] * d_out[c];
            }
            d_hidden[j] = hidden[j] > 0.0 ? dh : 0.0;
        }
        std::fill(d_feat.begin(), d_feat.end(), 0.0);
        for (int j = 0; j < H; ++j) {
            const double dh = d_hidden[j];
            if (dh == 0.0) continue;
            g_b1[j] += dh;
            for (std::size_t k = 0; k < in; ++k) {
                g_w1[j * in + k] += dh * feat[k];
                d_feat[k] += w1[j * in + k] * dh;
            }
        }
        for (int l = 0; l < cfg_.levels; ++l) {
            double* level_grad = g_tables + static_cast<std::size_t>(l) * layout_.table_size * F;
            for (int c = 0; c < 8; ++c) {
                const double w = corners[l].weight[c];
                if (w == 0.0) continue;
                double* entry = level_grad + static_cast<std::size_t>(corners[l].index[c]) * F;
                for (int f = 0; f < F; ++f) entry[f] += w * d_feat[l * F + f];
            }
        }
    }
}

PointNormalizer::PointNormalizer(const Mesh& mesh) {
    const auto [lo, hi] = mesh.bounds();
    center_ = 0.5 * (lo + hi);
    const double largest = (hi - lo).maxCoeff();
    scale_ = largest > 0.0 ? 0.9 / largest : 1.0;
}

namespace {

constexpr char kFieldMagic[8] = {'P', 'R', 'T', 'F', 'I', 'E', 'L', 'D'};

template <typename T>
void put_le(std::string& out, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

class LeCursor {
public:
    explicit LeCursor(std::string_view b) : bytes_(b) {}
    template <typename T>
    T get() {
        if (bytes_.size() - pos_ < sizeof(T)) {
            throw FormatError("truncated field checkpoint", FormatError::Unit::byte, pos_);
        }
        unsigned char buf[sizeof(T)];
        std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return v;
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string save_field(const ColorField& field, std::uint64_t step, int scalar_bits) {
    if (scalar_bits != 32 && scalar_bits != 64) throw ArgumentError("scalar_bits must be 32 or 64");
    const auto& c = field.config();
    std::string out(kFieldMagic, sizeof(kFieldMagic));
    put_le<std::uint32_t>(out, 1);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(scalar_bits));
    for (int v : {c.levels, c.base_resolution, c.max_resolution, c.features_per_level, c.log2_table_size, c.hidden}) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    }
    put_le<std::uint64_t>(out, step);
    put_le<std::uint64_t>(out, field.param_count());
    out.reserve(out.size() + field.param_count() * (scalar_bits / 8));
    for (double p : field.params()) {
        if (scalar_bits == 32) put_le(out, static_cast<float>(p));
        else put_le(out, p);
    }
    return out;
}

LoadedField load_field(std::string_view bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kFieldMagic, 8) != 0) {
        throw FormatError("missing PRTFIELD magic", FormatError::Unit::byte, 0);
    }
    LeCursor cur(bytes.substr(8));
    const auto version = cur.get<std::uint32_t>();
    if (version != 1) throw FormatError("unsupported field checkpoint version", FormatError::Unit::byte, 8);
    const auto bits = cur.get<std::uint32_t>();
    if (bits != 32 && bits != 64) throw FormatError("scalar_bits must be 32 or 64", FormatError::Unit::byte, 12);
    ColorFieldConfig cfg;
    int* fields[] = {&cfg.levels, &cfg.base_resolution, &cfg.max_resolution, &cfg.features_per_level,
                     &cfg.log2_table_size, &cfg.hidden};
    for (int* f : fields) {
        const auto v = cur.get<std::uint32_t>();
        if (v > 1u << 20) throw FormatError("implausible field configuration value", FormatError::Unit::byte, 8 + cur.pos());
        *f = static_cast<int>(v);
    }
    LoadedField out;
    try {
        out.field = ColorField::zeros(cfg);
    } catch (const ArgumentError& e) {
        throw ValidationError(std::string("field checkpoint configuration: ") + e.what());
    }
    out.step = cur.get<std::uint64_t>();
    const auto count = cur.get<std::uint64_t>();
    if (count != out.field.param_count()) {
        throw ValidationError("field checkpoint holds " + std::to_string(count) + " parameters, configuration implies " +
                              std::to_string(out.field.param_count()));
    }
    if (cur.remaining() != count * (bits / 8)) {
        throw FormatError("field checkpoint payload size mismatch", FormatError::Unit::byte, 8 + cur.pos());
    }
    auto params = out.field.params();
    for (std::size_t i = 0; i < count; ++i) {
        const double v = bits == 32 ? static_cast<double>(cur.get<float>()) : cur.get<double>();
        if (!std::isfinite(v)) throw ValidationError("non-finite parameter in field checkpoint");
        params[i] = v;
    }
    return out;
}

}  // namespace parte
