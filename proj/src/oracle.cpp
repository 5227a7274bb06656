#include "parte/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <sstream>

#include "parte/base64.hpp"

namespace parte {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& what) { throw OracleError(OracleError::Kind::malformed, what); }

std::string payload_bytes(const json& payload, const char* encoding) {
    if (!payload.is_object() || payload.value("encoding", "") != encoding || !payload.contains("data") ||
        !payload.at("data").is_string()) {
        malformed(std::string("expected a '") + encoding + "' payload");
    }
    try {
        return base64_decode(payload.at("data").get<std::string>());
    } catch (const ValidationError& e) {
        malformed(std::string("payload data: ") + e.what());
    }
}

std::pair<int, int> declared_size(const json& payload) {
    if (!payload.contains("width") || !payload.contains("height") || !payload.at("width").is_number_integer() ||
        !payload.at("height").is_number_integer()) {
        malformed("payload lacks integer width/height");
    }
    return {payload.at("width").get<int>(), payload.at("height").get<int>()};
}

}  // namespace

json png_payload(const Image& img) {
    return {{"encoding", "png"}, {"width", img.width}, {"height", img.height}, {"data", base64_encode(encode_png(img))}};
}

json label_png_payload(const LabelMap& labels) {
    return {{"encoding", "png"},
            {"width", labels.width},
            {"height", labels.height},
            {"data", base64_encode(encode_label_png(labels))}};
}

json f32_payload(const Image& img) {
    std::string bytes;
    bytes.reserve(img.size() * 4);
    for (double v : img.data) {
        const float f = static_cast<float>(v);
        unsigned char buf[4];
        std::memcpy(buf, &f, 4);
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + 4);
        bytes.append(reinterpret_cast<const char*>(buf), 4);
    }
    return {{"encoding", "f32le"}, {"shape", {img.height, img.width, img.channels}}, {"data", base64_encode(bytes)}};
}

Image decode_png_payload(const json& payload) {
    const std::string bytes = payload_bytes(payload, "png");
    const auto [w, h] = declared_size(payload);
    Image img;
    try {
        img = decode_png(bytes);
    } catch (const FormatError& e) {
        malformed(e.what());
    }
    if (img.width != w || img.height != h) {
        throw ValidationError("PNG payload is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                              ", header declares " + std::to_string(w) + "x" + std::to_string(h));
    }
    return img;
}

LabelMap decode_label_payload(const json& payload) {
    const std::string bytes = payload_bytes(payload, "png");
    const auto [w, h] = declared_size(payload);
    LabelMap labels;
    try {
        labels = decode_label_png(bytes);
    } catch (const FormatError& e) {
        malformed(e.what());
    }
    if (labels.width != w || labels.height != h) {
        throw ValidationError("label payload is " + std::to_string(labels.width) + "x" +
                              std::to_string(labels.height) + ", header declares " + std::to_string(w) + "x" +
                              std::to_string(h));
    }
    return labels;
}

Image decode_f32_payload(const json& payload) {
    const std::string bytes = payload_bytes(payload, "f32le");
    if (!payload.contains("shape") || !payload.at("shape").is_array() || payload.at("shape").size() != 3) {
        malformed("f32le payload needs a [H, W, C] shape");
    }
    std::array<long long, 3> shape{};
    for (int k = 0; k < 3; ++k) {
        const auto& v = payload.at("shape").at(k);
        if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > (1 << 16)) {
            malformed("f32le shape entries must be positive integers");
        }
        shape[k] = v.get<long long>();
    }
    const auto count = static_cast<std::size_t>(shape[0] * shape[1] * shape[2]);
    if (bytes.size() != count * 4) {
        throw ValidationError("f32le payload holds " + std::to_string(bytes.size() / 4) + " values, shape declares " +
                              std::to_string(count));
    }
    Image img(static_cast<int>(shape[1]), static_cast<int>(shape[0]), static_cast<int>(shape[2]));
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char buf[4];
        std::memcpy(buf, bytes.data() + i * 4, 4);
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + 4);
        float f;
        std::memcpy(&f, buf, 4);
        img.data[i] = f;
    }
    return img;
}

std::string request_hash(const json& request) {
    json copy = request;
    if (copy.is_object()) copy.erase("id");
    const std::string text = copy.dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json OracleClient::call(json request) {
    const std::uint64_t id = next_id_++;
    request["id"] = id;
    const std::string line = transport_->exchange(request.dump());
    json response;
    try {
        response = json::parse(line);
    } catch (const json::parse_error& e) {
        malformed(std::string("response is not JSON: ") + e.what());
    }
    if (!response.is_object() || !response.contains("id") || !response.at("id").is_number_unsigned()) {
        malformed("response lacks an id");
    }
    const auto rid = response.at("id").get<std::uint64_t>();
    if (rid != id) {
        throw OracleError(OracleError::Kind::protocol,
                          "response id " + std::to_string(rid) + " does not match request id " + std::to_string(id));
    }
    const std::string status = response.value("status", "");
    if (status == "error") {
        throw OracleError(OracleError::Kind::remote, "oracle error: " + response.value("error", std::string("(none)")));
    }
    if (status != "ok") malformed("response status must be 'ok' or 'error'");
    if (!response.contains("payload")) malformed("ok response lacks a payload");
    return response.at("payload");
}

std::uint64_t OracleClient::ping() {
    const json payload = call({{"op", "ping"}});
    if (!payload.is_object() || payload.value("pong", false) != true) malformed("ping payload must be {\"pong\": true}");
    return last_id();
}

LabelMap OracleClient::segment(const Image& normal_map, std::span<const std::uint8_t> mask,
                               const SegmentContext& context) {
    if (normal_map.channels != 3) throw ContractError("segment: normal map must be RGB");
    if (mask.size() != normal_map.pixel_count()) throw ContractError("segment: mask size differs from normal map");
    Image rgba(normal_map.width, normal_map.height, 4);
    for (std::size_t p = 0; p < normal_map.pixel_count(); ++p) {
        for (int c = 0; c < 3; ++c) rgba.data[p * 4 + c] = normal_map.data[p * 3 + c];
        rgba.data[p * 4 + 3] = mask[p] ? 1.0 : 0.0;
    }
    json ctx = {{"is_front", context.is_front}};
    ctx["view"] = context.view ? to_json(*context.view) : json(nullptr);
    ctx["front_image"] = context.front_image ? png_payload(*context.front_image) : json(nullptr);
    const json payload = call({{"op", "segment"}, {"normal_map", png_payload(rgba)}, {"context", ctx}});
    LabelMap labels = decode_label_payload(payload);
    if (labels.width != normal_map.width || labels.height != normal_map.height) {
        throw ValidationError("segment response resolution differs from request");
    }
    return labels;
}

Image OracleClient::predict_noise(const Image& noisy, double t, const ScoreConditions& conditions, bool conditional) {
    if (!(t > 0.0 && t < 1.0)) throw ArgumentError("predict_noise: t must lie in (0, 1), got " + std::to_string(t));
    json cond = {{"prompts", conditions.prompts}};
    cond["part_labels"] = conditions.part_labels ? label_png_payload(*conditions.part_labels) : json(nullptr);
    cond["front_image"] = conditions.front_image ? png_payload(*conditions.front_image) : json(nullptr);
    cond["view"] = conditions.view ? to_json(*conditions.view) : json(nullptr);
    const json payload = call({{"op", "predict_noise"},
                               {"t", t},
                               {"conditional", conditional},
                               {"image", f32_payload(noisy)},
                               {"conditions", cond}});
    Image eps = decode_f32_payload(payload);
    if (!eps.same_shape(noisy)) throw ValidationError("predict_noise response shape differs from request");
    return eps;
}

LabelMap OracleLabelProvider::labels_for(const Request& request) {
    SegmentContext ctx{request.is_front, &request.view, request.is_front ? front_image_ : nullptr};
    return client_.segment(request.buffers.normal_map, request.buffers.mask, ctx);
}

}  // namespace parte
