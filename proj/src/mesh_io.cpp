#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "parte/error.hpp"
#include "parte/mesh.hpp"

namespace parte {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

std::string lower_ext(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

// ---- OBJ -----------------------------------------------------------------

}  // namespace

Mesh parse_obj(std::string_view text) {
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::uint64_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto tok = split_ws(line);
        if (tok.empty()) continue;

        if (tok[0] == "v") {
            if (tok.size() < 4) throw FormatError("vertex record needs 3 coordinates", FormatError::Unit::line, line_no);
            Vec3 v;
            for (int k = 0; k < 3; ++k) {
                if (!parse_number(tok[k + 1], v[k])) {
                    throw FormatError("bad coordinate '" + std::string(tok[k + 1]) + "'", FormatError::Unit::line, line_no);
                }
            }
            verts.push_back(v);
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw FormatError("face record needs at least 3 vertices", FormatError::Unit::line, line_no);
            std::vector<std::uint32_t> poly;
            for (std::size_t k = 1; k < tok.size(); ++k) {
                std::string_view idx_tok = tok[k].substr(0, tok[k].find('/'));
                long long idx = 0;
                if (!parse_number(idx_tok, idx) || idx == 0) {
                    throw FormatError("bad face index '" + std::string(tok[k]) + "'", FormatError::Unit::line, line_no);
                }
                long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(verts.size()) + idx;
                if (resolved < 0 || resolved > static_cast<long long>(std::numeric_limits<std::uint32_t>::max())) {
                    throw ValidationError("face on line " + std::to_string(line_no) + " references vertex " +
                                          std::to_string(idx) + " of " + std::to_string(verts.size()));
                }
                poly.push_back(static_cast<std::uint32_t>(resolved));
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
        }
        // vt, vn, g, o, s, usemtl, mtllib: positions and faces only.
    }
    return Mesh::create(std::move(verts), std::move(faces));
}

namespace {

// ---- PLY -----------------------------------------------------------------

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> ply_type(std::string_view s) {
    if (s == "char" || s == "int8") return PlyType::i8;
    if (s == "uchar" || s == "uint8") return PlyType::u8;
    if (s == "short" || s == "int16") return PlyType::i16;
    if (s == "ushort" || s == "uint16") return PlyType::u16;
    if (s == "int" || s == "int32") return PlyType::i32;
    if (s == "uint" || s == "uint32") return PlyType::u32;
    if (s == "float" || s == "float32") return PlyType::f32;
    if (s == "double" || s == "float64") return PlyType::f64;
    return std::nullopt;
}

std::size_t type_size(PlyType t) {
    switch (t) {
        case PlyType::i8: case PlyType::u8: return 1;
        case PlyType::i16: case PlyType::u16: return 2;
        case PlyType::i32: case PlyType::u32: case PlyType::f32: return 4;
        case PlyType::f64: return 8;
    }
    return 0;
}

bool is_integral(PlyType t) { return t != PlyType::f32 && t != PlyType::f64; }

struct PlyProperty {
    std::string name;
    PlyType type{};
    bool is_list = false;
    PlyType count_type{};
};

struct PlyElement {
    std::string name;
    std::uint64_t count = 0;
    std::vector<PlyProperty> props;
};

enum class PlyFormat { ascii, binary_le, binary_be };

// Reads successive values from the body in either encoding.
class PlyReader {
public:
    PlyReader(std::string_view body, std::size_t body_offset, PlyFormat fmt, std::uint64_t first_line)
        : body_(body), base_(body_offset), fmt_(fmt), line_(first_line) {}

    double read(PlyType t) {
        return fmt_ == PlyFormat::ascii ? read_ascii(t) : read_binary(t);
    }

    std::size_t remaining() const { return body_.size() - pos_; }

    [[noreturn]] void fail(const std::string& msg) const {
        if (fmt_ == PlyFormat::ascii) throw FormatError(msg, FormatError::Unit::line, line_);
        throw FormatError(msg, FormatError::Unit::byte, base_ + pos_);
    }

private:
    double read_ascii(PlyType t) {
        while (pos_ < body_.size() && std::isspace(static_cast<unsigned char>(body_[pos_]))) {
            if (body_[pos_] == '\n') ++line_;
            ++pos_;
        }
        if (pos_ >= body_.size()) fail("unexpected end of PLY data");
        const std::size_t start = pos_;
        while (pos_ < body_.size() && !std::isspace(static_cast<unsigned char>(body_[pos_]))) ++pos_;
        const std::string_view tok = body_.substr(start, pos_ - start);
        double v = 0;
        if (is_integral(t)) {
            long long iv = 0;
            if (!parse_number(tok, iv)) fail("bad integer '" + std::string(tok) + "'");
            v = static_cast<double>(iv);
        } else if (!parse_number(tok, v)) {
            fail("bad number '" + std::string(tok) + "'");
        }
        return v;
    }

    double read_binary(PlyType t) {
        const std::size_t n = type_size(t);
        if (remaining() < n) fail("unexpected end of PLY data");
        unsigned char buf[8];
        std::memcpy(buf, body_.data() + pos_, n);
        const bool swap = (fmt_ == PlyFormat::binary_be) == (std::endian::native == std::endian::little);
        if (swap) std::reverse(buf, buf + n);
        pos_ += n;
        switch (t) {
            case PlyType::i8: { std::int8_t v; std::memcpy(&v, buf, 1); return v; }
            case PlyType::u8: { std::uint8_t v; std::memcpy(&v, buf, 1); return v; }
            case PlyType::i16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
            case PlyType::u16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
            case PlyType::i32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
            case PlyType::u32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
            case PlyType::f32: { float v; std::memcpy(&v, buf, 4); return v; }
            case PlyType::f64: { double v; std::memcpy(&v, buf, 8); return v; }
        }
        return 0;
    }

    std::string_view body_;
    std::size_t base_;
    PlyFormat fmt_;
    std::size_t pos_ = 0;
    std::uint64_t line_;
};

int find_prop(const PlyElement& e, std::string_view name) {
    for (std::size_t i = 0; i < e.props.size(); ++i) {
        if (e.props[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

}  // namespace

Mesh parse_ply(std::string_view bytes) {
    // Header: ASCII lines up to and including "end_header".
    std::size_t pos = 0;
    std::uint64_t line_no = 0;
    auto next_line = [&]() -> std::optional<std::string_view> {
        if (pos >= bytes.size()) return std::nullopt;
        std::size_t end = bytes.find('\n', pos);
        if (end == std::string_view::npos) return std::nullopt;
        std::string_view line = bytes.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        ++line_no;
        return line;
    };

    auto magic = next_line();
    if (!magic || *magic != "ply") throw FormatError("missing 'ply' magic", FormatError::Unit::line, 1);

    std::optional<PlyFormat> fmt;
    std::vector<PlyElement> elements;
    bool ended = false;
    while (auto line = next_line()) {
        const auto tok = split_ws(*line);
        if (tok.empty()) continue;
        if (tok[0] == "end_header") { ended = true; break; }
        if (tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "format") {
            if (tok.size() != 3 || tok[2] != "1.0") throw FormatError("bad format line", FormatError::Unit::line, line_no);
            if (tok[1] == "ascii") fmt = PlyFormat::ascii;
            else if (tok[1] == "binary_little_endian") fmt = PlyFormat::binary_le;
            else if (tok[1] == "binary_big_endian") fmt = PlyFormat::binary_be;
            else throw FormatError("unknown PLY encoding '" + std::string(tok[1]) + "'", FormatError::Unit::line, line_no);
        } else if (tok[0] == "element") {
            PlyElement e;
            if (tok.size() != 3 || !parse_number(tok[2], e.count)) {
                throw FormatError("bad element line", FormatError::Unit::line, line_no);
            }
            e.name = std::string(tok[1]);
            elements.push_back(std::move(e));
        } else if (tok[0] == "property") {
            if (elements.empty()) throw FormatError("property before element", FormatError::Unit::line, line_no);
            PlyProperty p;
            if (tok.size() == 5 && tok[1] == "list") {
                auto ct = ply_type(tok[2]);
                auto vt = ply_type(tok[3]);
                if (!ct || !vt || !is_integral(*ct)) throw FormatError("bad list property", FormatError::Unit::line, line_no);
                p.is_list = true;
                p.count_type = *ct;
                p.type = *vt;
                p.name = std::string(tok[4]);
            } else if (tok.size() == 3) {
                auto t = ply_type(tok[1]);
                if (!t) throw FormatError("unknown property type '" + std::string(tok[1]) + "'", FormatError::Unit::line, line_no);
                p.type = *t;
                p.name = std::string(tok[2]);
            } else {
                throw FormatError("bad property line", FormatError::Unit::line, line_no);
            }
            elements.back().props.push_back(std::move(p));
        } else {
            throw FormatError("unknown header keyword '" + std::string(tok[0]) + "'", FormatError::Unit::line, line_no);
        }
    }
    if (!ended) throw FormatError("missing end_header", FormatError::Unit::line, line_no + 1);
    if (!fmt) throw FormatError("missing format line", FormatError::Unit::line, line_no);

    PlyReader reader(bytes.substr(pos), pos, *fmt, line_no + 1);

    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::vector<Vec3> normals, colors;
    std::vector<PartLabel> labels;
    bool have_normals = false, have_colors = false, have_labels = false, seen_vertex = false;

    for (const PlyElement& e : elements) {
        if (e.name == "vertex") {
            if (seen_vertex) reader.fail("duplicate vertex element");
            seen_vertex = true;
            const int ix = find_prop(e, "x"), iy = find_prop(e, "y"), iz = find_prop(e, "z");
            if (ix < 0 || iy < 0 || iz < 0) throw FormatError("vertex element lacks x/y/z", FormatError::Unit::line, line_no);
            const int inx = find_prop(e, "nx"), iny = find_prop(e, "ny"), inz = find_prop(e, "nz");
            const int ir = find_prop(e, "red"), ig = find_prop(e, "green"), ib = find_prop(e, "blue");
            const int il = find_prop(e, "part_label");
            for (const auto& p : e.props) {
                if (p.is_list) throw FormatError("list property on vertex element", FormatError::Unit::line, line_no);
            }
            have_normals = inx >= 0 && iny >= 0 && inz >= 0;
            have_colors = ir >= 0 && ig >= 0 && ib >= 0;
            have_labels = il >= 0;
            if (have_labels && !is_integral(e.props[il].type)) {
                throw FormatError("part_label must be an integer property", FormatError::Unit::line, line_no);
            }
            const double color_scale = have_colors && is_integral(e.props[ir].type) ? 1.0 / 255.0 : 1.0;
            // Binary: each record occupies at least one byte, so the count is bounded by the data size.
            const std::size_t cap = std::min<std::uint64_t>(e.count, reader.remaining());
            verts.reserve(cap);
            std::vector<double> row(e.props.size());
            for (std::uint64_t i = 0; i < e.count; ++i) {
                for (std::size_t k = 0; k < e.props.size(); ++k) row[k] = reader.read(e.props[k].type);
                verts.emplace_back(row[ix], row[iy], row[iz]);
                if (have_normals) {
                    Vec3 n(row[inx], row[iny], row[inz]);
                    const double len = n.norm();
                    if (!(len > 0.0) || !std::isfinite(len)) {
                        throw ValidationError("vertex " + std::to_string(i) + " has a zero or non-finite normal");
                    }
                    // Unit normals pass through untouched so binary round trips stay exact.
                    normals.push_back(std::abs(len - 1.0) < 1e-9 ? n : Vec3(n / len));
                }
                if (have_colors) colors.emplace_back(row[ir] * color_scale, row[ig] * color_scale, row[ib] * color_scale);
                if (have_labels) {
                    const double code = row[il];
                    if (code < 0 || code > 255) throw ValidationError("part_label code out of range");
                    labels.push_back(label_from_code(static_cast<std::uint8_t>(code)));
                }
            }
        } else if (e.name == "face") {
            int il = find_prop(e, "vertex_indices");
            if (il < 0) il = find_prop(e, "vertex_index");
            if (il < 0 || !e.props[il].is_list) throw FormatError("face element lacks vertex_indices list", FormatError::Unit::line, line_no);
            if (!is_integral(e.props[il].type)) throw FormatError("face indices must be integers", FormatError::Unit::line, line_no);
            faces.reserve(std::min<std::uint64_t>(e.count, reader.remaining()));
            std::vector<std::uint32_t> poly;
            for (std::uint64_t i = 0; i < e.count; ++i) {
                for (std::size_t k = 0; k < e.props.size(); ++k) {
                    const PlyProperty& p = e.props[k];
                    if (!p.is_list) { reader.read(p.type); continue; }
                    const double cnt = reader.read(p.count_type);
                    if (cnt < 0) reader.fail("negative list length");
                    const auto count = static_cast<std::uint64_t>(cnt);
                    if (static_cast<int>(k) == il) {
                        if (count < 3) reader.fail("face with fewer than 3 vertices");
                        poly.clear();
                        for (std::uint64_t j = 0; j < count; ++j) {
                            const double idx = reader.read(p.type);
                            if (idx < 0 || idx > std::numeric_limits<std::uint32_t>::max()) {
                                throw ValidationError("face " + std::to_string(i) + " has index " + std::to_string(static_cast<long long>(idx)));
                            }
                            poly.push_back(static_cast<std::uint32_t>(idx));
                        }
                        for (std::size_t j = 1; j + 1 < poly.size(); ++j) faces.push_back({poly[0], poly[j], poly[j + 1]});
                    } else {
                        for (std::uint64_t j = 0; j < count; ++j) reader.read(p.type);
                    }
                }
            }
        } else {
            // Unknown element: consume and ignore.
            for (std::uint64_t i = 0; i < e.count; ++i) {
                for (const PlyProperty& p : e.props) {
                    if (!p.is_list) { reader.read(p.type); continue; }
                    const double cnt = reader.read(p.count_type);
                    if (cnt < 0) reader.fail("negative list length");
                    for (std::uint64_t j = 0; j < static_cast<std::uint64_t>(cnt); ++j) reader.read(p.type);
                }
            }
        }
    }

    std::optional<std::vector<Vec3>> n, c;
    std::optional<std::vector<PartLabel>> l;
    if (have_normals) n = std::move(normals);
    if (have_colors) c = std::move(colors);
    if (have_labels) l = std::move(labels);
    return Mesh::create(std::move(verts), std::move(faces), std::move(n), std::move(c), std::move(l));
}

Mesh load_mesh(const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext != ".obj" && ext != ".ply") throw IoError("unsupported mesh extension '" + ext + "'");
    const std::string bytes = read_file(path);
    return ext == ".obj" ? parse_obj(bytes) : parse_ply(bytes);
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

template <typename T>
void append_le(std::string& out, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

std::uint8_t quantize_color(double c) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

}  // namespace

std::string serialize_ply(const Mesh& mesh, PlyEncoding encoding) {
    const bool ascii = encoding == PlyEncoding::ascii;
    std::string out;
    out += "ply\n";
    out += ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
    out += "comment units centimeters\n";
    out += "element vertex " + std::to_string(mesh.vertex_count()) + "\n";
    out += "property double x\nproperty double y\nproperty double z\n";
    if (mesh.has_normals()) out += "property double nx\nproperty double ny\nproperty double nz\n";
    if (mesh.has_colors()) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (mesh.has_labels()) out += "property uchar part_label\n";
    out += "element face " + std::to_string(mesh.face_count()) + "\n";
    out += "property list uchar int vertex_indices\n";
    out += "end_header\n";

    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
        std::vector<double> reals(mesh.vertices()[i].data(), mesh.vertices()[i].data() + 3);
        if (mesh.has_normals()) reals.insert(reals.end(), mesh.normals()[i].data(), mesh.normals()[i].data() + 3);
        std::vector<std::uint8_t> bytes;
        if (mesh.has_colors()) {
            for (int k = 0; k < 3; ++k) bytes.push_back(quantize_color(mesh.colors()[i][k]));
        }
        if (mesh.has_labels()) bytes.push_back(to_code(mesh.labels()[i]));
        if (ascii) {
            bool first = true;
            for (double r : reals) {
                if (!first) out += ' ';
                append_double(out, r);
                first = false;
            }
            for (auto b : bytes) out += ' ' + std::to_string(b);
            out += '\n';
        } else {
            for (double r : reals) append_le(out, r);
            for (auto b : bytes) out += static_cast<char>(b);
        }
    }
    for (const Face& f : mesh.faces()) {
        if (ascii) {
            out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' + std::to_string(f[2]) + '\n';
        } else {
            out += static_cast<char>(3);
            for (auto idx : f) append_le(out, static_cast<std::int32_t>(idx));
        }
    }
    return out;
}

void save_ply(const Mesh& mesh, const std::filesystem::path& path, PlyEncoding encoding) {
    write_file(path, serialize_ply(mesh, encoding));
}

void save_obj(const Mesh& mesh, const std::filesystem::path& path) {
    std::string out;
    for (const Vec3& v : mesh.vertices()) {
        out += "v ";
        append_double(out, v.x());
        out += ' ';
        append_double(out, v.y());
        out += ' ';
        append_double(out, v.z());
        out += '\n';
    }
    for (const Face& f : mesh.faces()) {
        out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' + std::to_string(f[2] + 1) + '\n';
    }
    write_file(path, out);
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".obj") save_obj(mesh, path);
    else if (ext == ".ply") save_ply(mesh, path);
    else throw IoError("unsupported mesh extension '" + ext + "'");
}

}  // namespace parte
