#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "parte/oracle.hpp"

namespace parte {

namespace {

using nlohmann::json;

void ignore_sigpipe() {
    static const bool once = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)once;
}

void write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw OracleError(OracleError::Kind::unreachable, std::string("oracle write failed: ") + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::string read_line(int fd, std::string& buffer, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        if (auto nl = buffer.find('\n'); nl != std::string::npos) {
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw OracleError(OracleError::Kind::timeout, "oracle response timed out");
        pollfd pfd{fd, POLLIN, 0};
        const int r = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
        if (r < 0) {
            if (errno == EINTR) continue;
            throw OracleError(OracleError::Kind::unreachable, std::string("poll failed: ") + std::strerror(errno));
        }
        if (r == 0) continue;
        char chunk[65536];
        const ssize_t n = ::read(fd, chunk, sizeof(chunk));
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw OracleError(OracleError::Kind::unreachable, std::string("oracle read failed: ") + std::strerror(errno));
        }
        if (n == 0) throw OracleError(OracleError::Kind::unreachable, "oracle closed the connection");
        buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

}  // namespace

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
    ignore_sigpipe();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
        throw OracleError(OracleError::Kind::unreachable, "cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            fd_ = fd;
            break;
        }
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw OracleError(OracleError::Kind::unreachable, "cannot connect to " + host + ":" + service);
}

TcpTransport::~TcpTransport() {
    if (fd_ >= 0) ::close(fd_);
}

std::string TcpTransport::exchange(const std::string& line) {
    write_all(fd_, line + "\n");
    return read_line(fd_, buffer_, timeout_);
}

PipeTransport::PipeTransport(const std::string& command, std::chrono::milliseconds timeout) : timeout_(timeout) {
    ignore_sigpipe();
    int in[2], out[2];
    if (::pipe(in) != 0) throw OracleError(OracleError::Kind::unreachable, "pipe() failed");
    if (::pipe(out) != 0) {
        ::close(in[0]);
        ::close(in[1]);
        throw OracleError(OracleError::Kind::unreachable, "pipe() failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in[0], in[1], out[0], out[1]}) ::close(fd);
        throw OracleError(OracleError::Kind::unreachable, "fork() failed");
    }
    if (pid == 0) {
        ::dup2(in[0], STDIN_FILENO);
        ::dup2(out[1], STDOUT_FILENO);
        for (int fd : {in[0], in[1], out[0], out[1]}) ::close(fd);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(in[0]);
    ::close(out[1]);
    to_child_ = in[1];
    from_child_ = out[0];
    pid_ = pid;
}

PipeTransport::~PipeTransport() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        ::waitpid(pid_, &status, 0);
    }
}

std::string PipeTransport::exchange(const std::string& line) {
    write_all(to_child_, line + "\n");
    return read_line(from_child_, buffer_, timeout_);
}

RecordingTransport::RecordingTransport(std::unique_ptr<Transport> inner, const std::filesystem::path& transcript)
    : inner_(std::move(inner)), out_(transcript, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write transcript " + transcript.string());
}

std::string RecordingTransport::exchange(const std::string& line) {
    std::string response = inner_->exchange(line);
    json record;
    try {
        record = {{"request", json::parse(line)}, {"response", json::parse(response)}};
    } catch (const json::parse_error& e) {
        throw OracleError(OracleError::Kind::malformed, std::string("cannot record non-JSON exchange: ") + e.what());
    }
    out_ << record.dump() << '\n';
    out_.flush();
    return response;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& transcript) {
    std::ifstream in(transcript, std::ios::binary);
    if (!in) throw IoError("cannot open transcript " + transcript.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json record = json::parse(line);
            responses_[request_hash(record.at("request"))].push_back(std::move(record.at("response")));
        } catch (const json::exception& e) {
            throw FormatError(std::string("bad transcript record: ") + e.what(), FormatError::Unit::line, line_no);
        }
    }
}

std::string ReplayTransport::exchange(const std::string& line) {
    json request;
    try {
        request = json::parse(line);
    } catch (const json::parse_error& e) {
        throw OracleError(OracleError::Kind::malformed, std::string("request is not JSON: ") + e.what());
    }
    const std::string hash = request_hash(request);
    auto it = responses_.find(hash);
    if (it == responses_.end() || it->second.empty()) {
        throw OracleError(OracleError::Kind::transcript_miss, "transcript has no response for request " + hash);
    }
    json response = std::move(it->second.front());
    it->second.pop_front();
    if (request.contains("id")) response["id"] = request.at("id");
    return response.dump();
}

std::unique_ptr<Transport> open_transport(const std::string& endpoint, std::chrono::milliseconds timeout) {
    constexpr std::string_view tcp = "tcp://";
    constexpr std::string_view exec = "exec:";
    if (endpoint.rfind(tcp, 0) == 0) {
        const std::string rest = endpoint.substr(tcp.size());
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos) throw ArgumentError("tcp endpoint needs host:port");
        int port = 0;
        try {
            port = std::stoi(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw ArgumentError("bad port in endpoint '" + endpoint + "'");
        }
        if (port < 1 || port > 65535) throw ArgumentError("port out of range in endpoint '" + endpoint + "'");
        return std::make_unique<TcpTransport>(rest.substr(0, colon), static_cast<std::uint16_t>(port), timeout);
    }
    if (endpoint.rfind(exec, 0) == 0) return std::make_unique<PipeTransport>(endpoint.substr(exec.size()), timeout);
    throw ArgumentError("oracle endpoint must start with tcp:// or exec:");
}

}  // namespace parte
