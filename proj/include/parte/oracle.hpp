#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parte/error.hpp"
#include "parte/image.hpp"
#include "parte/partvote.hpp"
#include "parte/sds.hpp"
#include "parte/viewsphere.hpp"

namespace parte {

class OracleError : public Error {
public:
    enum class Kind { unreachable, timeout, malformed, remote, transcript_miss, protocol };

    OracleError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline constexpr std::chrono::seconds kDefaultOracleTimeout{120};

// Wire payloads -------------------------------------------------------------

/// {"encoding":"png","width":W,"height":H,"data":<base64 PNG>}
nlohmann::json png_payload(const Image& img);
nlohmann::json label_png_payload(const LabelMap& labels);
/// {"encoding":"f32le","shape":[H,W,C],"data":<base64 little-endian float32>}
nlohmann::json f32_payload(const Image& img);

/// Decoders throw OracleError(malformed) for structurally broken payloads
/// (missing fields, bad base64, undecodable PNG) and ValidationError when the
/// data disagrees with the declared shape or holds label codes above 5.
Image decode_png_payload(const nlohmann::json& payload);
LabelMap decode_label_payload(const nlohmann::json& payload);
Image decode_f32_payload(const nlohmann::json& payload);

/// FNV-1a 64 of the request serialized without its "id", as 16 hex digits.
std::string request_hash(const nlohmann::json& request);

// Transports -----------------------------------------------------------------

/// Carries one newline-delimited JSON request and returns one response line.
class Transport {
public:
    virtual ~Transport() = default;
    /// `line` carries no trailing newline; neither does the result.
    virtual std::string exchange(const std::string& line) = 0;
};

/// TCP connection to host:port.
class TcpTransport final : public Transport {
public:
    TcpTransport(const std::string& host, std::uint16_t port,
                 std::chrono::milliseconds timeout = kDefaultOracleTimeout);
    ~TcpTransport() override;
    TcpTransport(const TcpTransport&) = delete;
    TcpTransport& operator=(const TcpTransport&) = delete;

    std::string exchange(const std::string& line) override;

private:
    int fd_ = -1;
    std::chrono::milliseconds timeout_;
    std::string buffer_;
};

/// Spawns `/bin/sh -c command` and talks over its stdin/stdout.
class PipeTransport final : public Transport {
public:
    explicit PipeTransport(const std::string& command, std::chrono::milliseconds timeout = kDefaultOracleTimeout);
    ~PipeTransport() override;
    PipeTransport(const PipeTransport&) = delete;
    PipeTransport& operator=(const PipeTransport&) = delete;

    std::string exchange(const std::string& line) override;

private:
    int to_child_ = -1;
    int from_child_ = -1;
    int pid_ = -1;
    std::chrono::milliseconds timeout_;
    std::string buffer_;
};

/// Transcript: one {"request": ..., "response": ...} JSON object per line.
/// Records every exchange of the wrapped transport.
class RecordingTransport final : public Transport {
public:
    RecordingTransport(std::unique_ptr<Transport> inner, const std::filesystem::path& transcript);
    std::string exchange(const std::string& line) override;

private:
    std::unique_ptr<Transport> inner_;
    std::ofstream out_;
};

/// Answers from a transcript. Requests are matched by request_hash; repeated
/// identical requests are served in recorded order. The recorded response is
/// returned with its id set to the live request's id. A request absent from
/// the transcript raises OracleError(transcript_miss) naming its hash.
class ReplayTransport final : public Transport {
public:
    explicit ReplayTransport(const std::filesystem::path& transcript);
    std::string exchange(const std::string& line) override;

private:
    std::map<std::string, std::deque<nlohmann::json>> responses_;
};

/// "tcp://host:port", "exec:<shell command>".
std::unique_ptr<Transport> open_transport(const std::string& endpoint,
                                          std::chrono::milliseconds timeout = kDefaultOracleTimeout);

// Client -------------------------------------------------------------------

struct SegmentContext {
    bool is_front = false;
    const Viewpoint* view = nullptr;
    const Image* front_image = nullptr;
};

/// Protocol client. Ids increase from 1 and every response must echo the
/// id of its request. One request in flight; not for concurrent use.
class OracleClient {
public:
    explicit OracleClient(std::unique_ptr<Transport> transport) : transport_(std::move(transport)) {}

    /// Returns the echoed id.
    std::uint64_t ping();

    /// `normal_map` is sent as RGBA PNG with alpha = foreground mask.
    LabelMap segment(const Image& normal_map, std::span<const std::uint8_t> mask, const SegmentContext& context);

    /// Throws ArgumentError before sending when t is outside (0, 1).
    Image predict_noise(const Image& noisy, double t, const ScoreConditions& conditions, bool conditional);

    /// Sends a raw request (an "id" is assigned) and returns the validated
    /// "payload" of an ok response.
    nlohmann::json call(nlohmann::json request);

    std::uint64_t last_id() const { return next_id_ - 1; }

private:
    std::unique_ptr<Transport> transport_;
    std::uint64_t next_id_ = 1;
};

/// Segmentation via the oracle: the view's normal map goes out, a label map
/// comes back. The front view carries the front image when one is set.
class OracleLabelProvider final : public LabelProvider {
public:
    explicit OracleLabelProvider(OracleClient& client, const Image* front_image = nullptr)
        : client_(client), front_image_(front_image) {}
    LabelMap labels_for(const Request& request) override;

private:
    OracleClient& client_;
    const Image* front_image_;
};

/// Noise prediction via the oracle.
class RemoteScoreModel final : public ScoreModel {
public:
    explicit RemoteScoreModel(OracleClient& client) : client_(client) {}
    Image predict_noise(const Image& noisy, double t, const ScoreConditions& conditions, bool conditional) override {
        return client_.predict_noise(noisy, t, conditions, conditional);
    }

private:
    OracleClient& client_;
};

}  // namespace parte
